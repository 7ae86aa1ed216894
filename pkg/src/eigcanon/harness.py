"""Randomized verification of invariance and equivariance claims.

Each verifier runs seeded trials against a supplied canonicalization
or model, counts successes per check, and keeps a handful of failure
exemplars (the actual offending inputs) for replay.  Failed
canonicalizations are tracked separately from equivariance failures:
returning "failed" honestly is an accuracy statement, not a bug.

Also here: the paired-eigenvector construction showing that
sign-invariant two-branch encoders cannot separate certain
non-isomorphic graphs, and the variant-superiority report over a
corpus of degenerate eigenspaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eigvec import is_sign_uncanonicalizable
from .graphs import Graph, normalized_laplacian
from .lappe import VARIANT_FA, VARIANT_MAP, VARIANT_OAP, oap_lap
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    random_orthogonal,
    random_permutation,
    sym_eig,
)


@dataclass
class TrialReport:
    """Outcome counts of one verification run."""

    name: str
    total: int
    tolerance: float
    seed: int
    counts: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    MAX_EXEMPLARS = 5

    @property
    def ok(self) -> bool:
        return not self.failures and self.counts.get("error", 0) == 0

    def record_failure(self, **exemplar) -> None:
        if len(self.failures) < self.MAX_EXEMPLARS:
            self.failures.append(exemplar)

    def lines(self) -> list[str]:
        out = [f"check={self.name}", f"total={self.total}",
               f"tolerance={self.tolerance:g}", f"seed={self.seed}"]
        for key in sorted(self.counts):
            out.append(f"{key}={self.counts[key]}")
        out.append(f"failures={len(self.failures)}")
        return out


def _draw_sizes(rng: np.random.Generator) -> tuple[int, int]:
    n = int(rng.integers(2, 13))
    d = int(rng.integers(1, min(4, n - 1) + 1))
    return n, d


def _sub(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def verify_basis_invariance(
    canon_fn: Callable[[np.ndarray], np.ndarray | None],
    trials: int = 1000,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> TrialReport:
    """Check canon(U @ Q) == canon(U) for random bases and rotations.

    canon_fn maps an orthonormal (n, d) basis to a matrix, or None for
    a failed canonicalization (counted separately).
    """
    if trials < 1:
        raise ValueError(f"verify_basis_invariance: trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    report = TrialReport("basis-invariance", trials, tolerance, seed,
                         counts={"correct": 0, "failed_canon": 0})
    for _ in range(trials):
        n, d = _draw_sizes(rng)
        U = random_orthogonal(n, _sub(rng))[:, :d]
        Q = random_orthogonal(d, _sub(rng))
        A = canon_fn(U)
        B = canon_fn(U @ Q)
        if A is None or B is None:
            report.counts["failed_canon"] += 1
            continue
        if np.max(np.abs(A - B)) <= tolerance:
            report.counts["correct"] += 1
        else:
            report.record_failure(check="q", n=n, d=d, U=U, Q=Q)
    return report


def verify_perm_equivariance(
    canon_fn: Callable[[np.ndarray], np.ndarray | None],
    trials: int = 1000,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> TrialReport:
    """Joint permutation/basis test of a canonicalization.

    Per trial, draws an orthonormal U, a permutation P, a rotation Q
    and checks three identities:

    - p:  canon(P U)   == P canon(U)
    - q:  canon(U Q)   ==   canon(U)
    - pq: canon(P U Q) == P canon(U)

    A trial where any of the four canonicalizations returns None is
    counted as failed_canon and excluded from the three checks.
    """
    if trials < 1:
        raise ValueError(f"verify_perm_equivariance: trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    report = TrialReport(
        "perm-equivariance", trials, tolerance, seed,
        counts={"checked": 0, "p_correct": 0, "q_correct": 0,
                "pq_correct": 0, "failed_canon": 0},
    )
    for _ in range(trials):
        n, d = _draw_sizes(rng)
        U = random_orthogonal(n, _sub(rng))[:, :d]
        Q = random_orthogonal(d, _sub(rng))
        P = random_permutation(n, _sub(rng))
        F = canon_fn(U)
        FP = canon_fn(P @ U)
        FQ = canon_fn(U @ Q)
        FPQ = canon_fn(P @ U @ Q)
        if any(x is None for x in (F, FP, FQ, FPQ)):
            report.counts["failed_canon"] += 1
            continue
        report.counts["checked"] += 1
        target = P @ F
        for label, got, want in (
            ("p", FP, target),
            ("q", FQ, F),
            ("pq", FPQ, target),
        ):
            if np.max(np.abs(got - want)) <= tolerance:
                report.counts[f"{label}_correct"] += 1
            else:
                report.record_failure(check=label, n=n, d=d, U=U, Q=Q, P=P)
    return report


def verify_orthogonal_equivariance(
    model_fn: Callable[[np.ndarray], np.ndarray],
    trials: int = 1000,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> TrialReport:
    """Check model(X @ Q) == model(X) @ Q on random data matrices.

    X is (n, k) standard normal with n in [2, 12] and k in
    [1, min(4, n-1)], so the covariance generically has full rank.
    """
    if trials < 1:
        raise ValueError(
            f"verify_orthogonal_equivariance: trials must be >= 1, got {trials}"
        )
    rng = np.random.default_rng(seed)
    report = TrialReport("orthogonal-equivariance", trials, tolerance, seed,
                         counts={"correct": 0, "error": 0})
    for _ in range(trials):
        n, k = _draw_sizes(rng)
        X = rng.standard_normal((n, k))
        Q = random_orthogonal(k, _sub(rng))
        try:
            left = model_fn(X) @ Q
            right = model_fn(X @ Q)
        except ValueError:
            report.counts["error"] += 1
            report.record_failure(check="error", n=n, k=k, X=X, Q=Q)
            continue
        if np.max(np.abs(left - right)) <= tolerance:
            report.counts["correct"] += 1
        else:
            report.record_failure(check="ortho", n=n, k=k, X=X, Q=Q)
    return report


# --- sign-invariant two-branch counterexample -------------------------------

# Two orthogonal eigenvector pairs whose entrywise absolute values agree
# column for column, yet whose weighted outer-product matrices differ
# (24 vs 16 zero entries certifies non-isomorphism).  Stored as exact
# integers; never recomputed.
U1_COLUMNS = (
    (-1, 1, -1, 1, 2, 2, -2, -2, 0, 0),
    (1, -1, 1, -1, 1, 1, 0, 0, -1, -1),
)
U2_COLUMNS = (
    (1, 1, -1, -1, 2, 2, -2, -2, 0, 0),
    (1, -1, -1, 1, 1, -1, 0, 0, -1, 1),
)
PAIR_EIGENVALUES = (1, 2)
EXPECTED_ZEROS = (24, 16)


def paired_matrices() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(U1, U2, L1, L2) of the counterexample, as integer arrays.

    L_i = 1 * u_i1 u_i1^T + 2 * u_i2 u_i2^T with unnormalized integer
    eigenvectors.
    """
    U1 = np.array(U1_COLUMNS, dtype=np.int64).T
    U2 = np.array(U2_COLUMNS, dtype=np.int64).T
    L1 = sum(lam * np.outer(U1[:, j], U1[:, j]) for j, lam in enumerate(PAIR_EIGENVALUES))
    L2 = sum(lam * np.outer(U2[:, j], U2[:, j]) for j, lam in enumerate(PAIR_EIGENVALUES))
    return U1, U2, L1, L2


def _rowwise_two_branch(seed: int, hidden: int = 7, out_dim: int = 3) -> Callable:
    """A random sign-invariant encoder f(U) = rho([phi(u_j) + phi(-u_j)]_j).

    phi is a per-entry two-layer map with a softplus nonlinearity
    (softplus has no odd symmetry, so the branch sum does not collapse
    to zero); rho is an affine map applied per row to the concatenated
    branch features.  Everything is drawn from the given seed.
    """
    rng = np.random.default_rng(seed)
    W1 = rng.standard_normal((1, hidden))
    b1 = rng.standard_normal(hidden)
    W2 = rng.standard_normal((hidden, hidden))
    b2 = rng.standard_normal(hidden)
    W3 = rng.standard_normal((2 * hidden, out_dim))
    b3 = rng.standard_normal(out_dim)

    def phi(u: np.ndarray) -> np.ndarray:
        z = np.logaddexp(0.0, u[:, None] * W1 + b1)  # softplus
        return z @ W2 + b2

    def f(U: np.ndarray) -> np.ndarray:
        branches = [phi(U[:, j]) + phi(-U[:, j]) for j in range(U.shape[1])]
        return np.concatenate(branches, axis=1) @ W3 + b3

    return f


@dataclass
class CounterexampleReport:
    checks: dict
    equal_functions: int
    n_functions: int
    tolerance: float
    seed: int

    @property
    def ok(self) -> bool:
        return all(self.checks.values()) and self.equal_functions == self.n_functions

    def lines(self) -> list[str]:
        out = [f"check={k} pass={v}" for k, v in self.checks.items()]
        out.append(f"equal_functions={self.equal_functions}/{self.n_functions}")
        return out


def signnet_counterexample(
    seed: int = 0,
    n_functions: int = 50,
    tolerance: float = 1e-6,
    tol: Tolerances = DEFAULT_TOL,
) -> CounterexampleReport:
    """Verify the paired construction and exercise random encoders on it.

    Checks (all on exact integer data):

    - both eigenvector pairs are orthogonal;
    - all four eigenvectors are sign-uncanonicalizable;
    - |U1| == |U2| entrywise;
    - the two weighted outer-product matrices have 24 and 16 zero
      entries respectively (hence describe different operators).

    Then builds ``n_functions`` random two-branch sign-invariant
    encoders and confirms each produces equal outputs on U1 and U2 (up
    to the row matching induced by the shared absolute values): such
    encoders only see |u| on sign-symmetric inputs, so the pair is
    indistinguishable to all of them.
    """
    U1, U2, L1, L2 = paired_matrices()
    checks = {
        "orthogonal_pair_1": int(U1[:, 0] @ U1[:, 1]) == 0,
        "orthogonal_pair_2": int(U2[:, 0] @ U2[:, 1]) == 0,
        "columns_uncanonicalizable": all(
            is_sign_uncanonicalizable(col, tol.tau_quant)
            for col in (U1[:, 0], U1[:, 1], U2[:, 0], U2[:, 1])
        ),
        "abs_values_match": bool(np.array_equal(np.abs(U1), np.abs(U2))),
        "zeros_L1": int(np.count_nonzero(L1 == 0)) == EXPECTED_ZEROS[0],
        "zeros_L2": int(np.count_nonzero(L2 == 0)) == EXPECTED_ZEROS[1],
        "zero_counts_differ": int(np.count_nonzero(L1 == 0))
        != int(np.count_nonzero(L2 == 0)),
    }

    # Row matching: rows with equal |U1| and |U2| values. The pinned
    # construction aligns row by row, but match defensively anyway.
    order1 = np.lexsort(np.abs(U1).T)
    order2 = np.lexsort(np.abs(U2).T)
    perm = np.empty(U1.shape[0], dtype=int)
    perm[order1] = order2

    rng = np.random.default_rng(seed)
    equal = 0
    for _ in range(n_functions):
        f = _rowwise_two_branch(_sub(rng))
        y1 = f(U1.astype(float))
        y2 = f(U2.astype(float))
        if np.max(np.abs(y1 - y2[perm])) <= tolerance:
            equal += 1
    return CounterexampleReport(
        checks=checks,
        equal_functions=equal,
        n_functions=n_functions,
        tolerance=tolerance,
        seed=seed,
    )


# --- variant superiority over degenerate eigenspaces ------------------------


def degenerate_spaces(
    graphs: list[Graph], tol: Tolerances = DEFAULT_TOL, min_dim: int = 2
) -> list[np.ndarray]:
    """Orthonormal bases of all eigenspaces with multiplicity >= min_dim
    across the normalized Laplacians of the given graphs."""
    out = []
    for g in graphs:
        for space in sym_eig(normalized_laplacian(g), tol):
            if space.dim >= min_dim:
                out.append(space.basis)
    return out


@dataclass
class SuperiorityReport:
    n_instances: int
    failed: dict
    dominance_ok: bool
    dominance_violations: list
    witnesses_over_map: list
    witnesses_over_fa: list

    def ratio(self, variant: str) -> float:
        return self.failed[variant] / self.n_instances

    def lines(self) -> list[str]:
        out = [f"instances={self.n_instances}"]
        for v in sorted(self.failed):
            out.append(f"failed[{v}]={self.failed[v]} ratio={self.ratio(v):.4f}")
        out.append(f"dominance_ok={self.dominance_ok}")
        out.append(f"strict_witnesses_over_map={len(self.witnesses_over_map)}")
        out.append(f"strict_witnesses_over_fa={len(self.witnesses_over_fa)}")
        return out


def superiority_report(
    bases: list[np.ndarray],
    c: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> SuperiorityReport:
    """Run the three key variants on each eigenspace basis and compare.

    Dominance holds when the finest keys succeed on every instance
    where either degenerate variant succeeds.  Witnesses are instance
    indices where the finest variant succeeds and the named degenerate
    variant fails (strictness).
    """
    if not bases:
        raise ValueError("superiority_report: empty corpus")
    variants = (VARIANT_OAP, VARIANT_MAP, VARIANT_FA)
    failed = {v: 0 for v in variants}
    violations = []
    wit_map, wit_fa = [], []
    for idx, U in enumerate(bases):
        ok = {}
        for v in variants:
            ok[v] = oap_lap(U, variant=v, c=c, tol=tol).ok
            if not ok[v]:
                failed[v] += 1
        if (ok[VARIANT_MAP] or ok[VARIANT_FA]) and not ok[VARIANT_OAP]:
            violations.append(idx)
        if ok[VARIANT_OAP] and not ok[VARIANT_MAP]:
            wit_map.append(idx)
        if ok[VARIANT_OAP] and not ok[VARIANT_FA]:
            wit_fa.append(idx)
    return SuperiorityReport(
        n_instances=len(bases),
        failed=failed,
        dominance_ok=not violations,
        dominance_violations=violations,
        witnesses_over_map=wit_map,
        witnesses_over_fa=wit_fa,
    )


def make_graph_backbone(seed: int, out_dim: int = 6) -> "Backbone":
    """Seeded random invariant backbone on graphs: two affine layers
    with tanh over the flattened adjacency.  Weights are drawn lazily
    per node count so one backbone serves graphs of any size."""
    from .averaging import ACTION_INVARIANT, Backbone

    cache: dict[int, tuple] = {}

    def params(n: int):
        if n not in cache:
            rng = np.random.default_rng([seed, n])
            W1 = rng.standard_normal((n * n, 2 * out_dim)) / n
            b1 = rng.standard_normal(2 * out_dim)
            W2 = rng.standard_normal((2 * out_dim, out_dim))
            cache[n] = (W1, b1, W2)
        return cache[n]

    def fn(g: Graph) -> np.ndarray:
        W1, b1, W2 = params(g.n)
        return np.tanh(g.adjacency.ravel() @ W1 + b1) @ W2

    return Backbone(fn=fn, output_action=ACTION_INVARIANT)
