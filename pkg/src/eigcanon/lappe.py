"""Permutation-equivariant eigenspace canonicalization via summary vectors.

Scanning projector columns in axis order (as `eigcanon.eigvec.oap_eig`
does) breaks permutation equivariance because the axis order is
arbitrary.  The pipeline here replaces axes with node keys computed
from the projector itself:

1. ``refinement_keys`` assigns each index a sortable key. Variants:
   - "oap": (quantized P_ii, descending multiset of quantized off-diagonal
     row entries) - the finest projector-only key;
   - "map": quantized squared row norm (integer sum of squares of the
     quantized row);
   - "fa": quantized diagonal entry only.
2. ``summary_groups`` pools indices with equal keys, orders groups by
   key descending, and builds one summary vector per group: the group
   indicator plus c times the all-ones vector (c irrational by default
   so rational entry patterns cannot cancel it).
3. ``oap_lap`` projects the summary vectors and greedily accepts
   independent directions; with d accepted, their Gram-Schmidt
   orthonormalization is the canonical basis.  Fewer distinct keys than
   dimensions, or a scan that runs dry, yields a "failed" outcome
   (a value, not an exception).

Equal keys on permuted input are permuted keys, so the whole pipeline
commutes with node relabeling.  Finer keys can only help: every variant
above is refined by "oap", hence "oap" succeeds whenever "map" or "fa"
does.  The "map" variant additionally insists that the j-th accepted
summary vector is the j-th group (no skipping), which is the historical
behavior it reproduces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigvec import (
    KIND_FAILED,
    KIND_FALLBACK,
    KIND_SINGLE,
    CanonOutcome,
    is_sign_uncanonicalizable,
    map_full,
    oap_eig,
    sign_canon_first_nonzero,
)
from .linalg import (
    DEFAULT_TOL,
    EigSpace,
    Tolerances,
    gram_schmidt,
    projection_of,
    residual_accept,
    sym_eig,
)

DEFAULT_C = 1.0 / math.pi

VARIANT_OAP = "oap"
VARIANT_MAP = "map"
VARIANT_FA = "fa"
VARIANT_AUGMENTED = "augmented"


def _quantize(M: np.ndarray, tau_quant: float) -> np.ndarray:
    return np.rint(np.asarray(M, dtype=float) / tau_quant).astype(np.int64)


def refinement_keys(
    P: np.ndarray, variant: str = VARIANT_OAP, tau_quant: float = DEFAULT_TOL.tau_quant
) -> list[tuple]:
    """Per-index sortable keys computed from the matrix P.

    P is normally a symmetric projector, but no projector property is
    required; keys are functions of the quantized entries only, so they
    relabel exactly under simultaneous row/column permutation.

    Equal "oap" keys imply equal "map" and equal "fa" keys: the "oap"
    key fixes the quantized diagonal entry and the quantized row
    multiset, which determine both degenerate keys exactly.
    """
    q = _quantize(P, tau_quant)
    n = q.shape[0]
    keys: list[tuple] = []
    for i in range(n):
        row = q[i]
        if variant == VARIANT_OAP:
            off = np.delete(row, i)
            off_sorted = tuple(int(x) for x in np.sort(off)[::-1])
            keys.append((int(row[i]), off_sorted))
        elif variant == VARIANT_MAP:
            keys.append((int(np.dot(row, row)),))
        elif variant == VARIANT_FA:
            keys.append((int(row[i]),))
        else:
            raise ValueError(
                f"refinement_keys: unknown variant {variant!r}; "
                "expected oap, map, or fa (augmented keys come from augmented_keys)"
            )
    return keys


def augmented_keys(
    P: np.ndarray,
    node_features: np.ndarray | None = None,
    sibling_projections: list[np.ndarray] | None = None,
    tau_quant: float = DEFAULT_TOL.tau_quant,
) -> list[tuple]:
    """OAP keys extended with node features and sibling-eigenspace keys.

    Two extensions, both optional:

    - a row of quantized node features is appended per index, so nodes
      distinguishable by features stop sharing keys;
    - the multiset of the index's OAP keys in the other ("sibling")
      eigenspaces of the same operator is appended, with the target
      space's own key kept in first, distinguished position.

    With neither extension the result equals ``refinement_keys(P, "oap")``
    exactly.  The base key is a prefix of the augmented key, so
    augmentation only ever splits groups, never merges them.
    """
    base = refinement_keys(P, VARIANT_OAP, tau_quant)
    if node_features is None and sibling_projections is None:
        return base

    n = len(base)
    feat_part: list[tuple] | None = None
    if node_features is not None:
        F = np.asarray(node_features, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        if F.shape[0] != n:
            raise ValueError(
                f"augmented_keys: {F.shape[0]} feature rows for {n} indices"
            )
        qf = _quantize(F, tau_quant)
        feat_part = [tuple(int(x) for x in qf[i]) for i in range(n)]

    sib_part: list[tuple] | None = None
    if sibling_projections is not None:
        sib_keys = [
            refinement_keys(S, VARIANT_OAP, tau_quant) for S in sibling_projections
        ]
        sib_part = [tuple(sorted(ks[i] for ks in sib_keys)) for i in range(n)]

    keys = []
    for i in range(n):
        k: tuple = base[i]
        if feat_part is not None:
            k = k + (feat_part[i],)
        if sib_part is not None:
            k = k + (sib_part[i],)
        keys.append(k)
    return keys


@dataclass(frozen=True)
class SummaryGroup:
    """Indices sharing one key, with their summary vector."""

    key: tuple
    members: tuple
    vector: np.ndarray = field(repr=False)
    rank: int = 0


def summary_groups(keys: list[tuple], c: float = DEFAULT_C) -> list[SummaryGroup]:
    """Group equal keys and build one summary vector per group.

    Groups are ordered by key, descending.  The group vector is
    sum(e_j for j in group) + c * ones, e.g. keys {a, a, b} with a > b
    and c = 0.5 give x1 = (1.5, 1.5, 0.5) and x2 = (0.5, 0.5, 1.5).
    """
    n = len(keys)
    by_key: dict[tuple, list[int]] = {}
    for i, k in enumerate(keys):
        by_key.setdefault(k, []).append(i)

    groups = []
    for rank, key in enumerate(sorted(by_key, reverse=True)):
        members = tuple(by_key[key])
        x = np.full(n, c, dtype=float)
        x[list(members)] += 1.0
        groups.append(SummaryGroup(key=key, members=members, vector=x, rank=rank))
    return groups


def oap_lap(
    U: np.ndarray,
    variant: str = VARIANT_OAP,
    c: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
    keys: list[tuple] | None = None,
) -> CanonOutcome:
    """Permutation-equivariant canonical basis of span(U), or "failed".

    Parameters
    ----------
    U : ndarray, shape (n, d)
        Orthonormal basis of the eigenspace.
    variant : str
        Key variant ("oap", "map", "fa"); ignored when `keys` is given.
    c : float, optional
        Summary-vector offset; defaults to 1/pi.
    tol : Tolerances
        eps_rank gates acceptance, tau_quant the key quantization.
    keys : list of tuple, optional
        Precomputed per-index keys (e.g. from `augmented_keys`).

    Returns
    -------
    CanonOutcome
        "single" with the canonical (n, d) basis and the accepted group
        ranks as witness, or "failed" with diagnostics when fewer than
        d groups exist or the scan finds fewer than d independent
        projections.  The "map" variant does not skip: it requires
        groups 1..d to be accepted in order.
    """
    if c is None:
        c = DEFAULT_C
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    n, d = U.shape
    P = projection_of(U)
    if keys is None:
        keys = refinement_keys(P, variant, tol.tau_quant)
    groups = summary_groups(keys, c)
    k = len(groups)
    method = f"{variant}-lap"

    if k < d:
        return CanonOutcome(
            kind=KIND_FAILED,
            forms=[U.copy()],
            method=method,
            detail=f"{k} distinct keys for a {d}-dimensional space",
        )

    candidates = groups[:d] if variant == VARIANT_MAP else groups
    accepted: list[np.ndarray] = []
    witness: list[int] = []
    B: np.ndarray | None = None
    for g in candidates:
        v = P @ g.vector
        ok, residual = residual_accept(v, B, tol.eps_rank)
        if not ok:
            if variant == VARIANT_MAP:
                return CanonOutcome(
                    kind=KIND_FAILED,
                    forms=[U.copy()],
                    method=method,
                    detail=(
                        f"summary vector of group {g.rank} is dependent and "
                        "the map variant does not skip"
                    ),
                )
            continue
        accepted.append(v)
        witness.append(g.rank)
        unit = residual / np.linalg.norm(residual)
        B = unit[:, None] if B is None else np.column_stack([B, unit])
        if len(accepted) == d:
            break

    if len(accepted) < d:
        return CanonOutcome(
            kind=KIND_FAILED,
            forms=[U.copy()],
            method=method,
            detail=(
                f"only {len(accepted)} independent summary projections "
                f"among {k} groups (need {d})"
            ),
        )
    form = gram_schmidt(np.column_stack(accepted), tol.eps_rank)
    return CanonOutcome(
        kind=KIND_SINGLE, forms=[form], method=method, witness=tuple(witness)
    )


@dataclass(frozen=True)
class SpaceReport:
    """Per-eigenspace canonicalization status inside a positional encoding."""

    eigenvalue: float
    dim: int
    kind: str
    method: str


@dataclass(frozen=True)
class PEResult:
    """Canonicalized eigenvector matrix plus per-space statuses."""

    vectors: np.ndarray = field(repr=False)
    spaces: list[SpaceReport] = field(default_factory=list)
    padded: bool = False

    @property
    def counts(self) -> dict[str, int]:
        out = {KIND_SINGLE: 0, KIND_FALLBACK: 0, KIND_FAILED: 0}
        for s in self.spaces:
            out[s.kind] += 1
        return out


def canonicalize_pe(
    L: np.ndarray,
    k_vectors: int,
    method: str = "oap-lap",
    c: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> PEResult:
    """Positional encoding from the first k eigenvectors of L, canonicalized.

    Eigenspaces of L are processed in ascending eigenvalue order until
    k_vectors columns are collected.  `method` selects the per-space
    treatment:

    - "sign-first": axis-dependent; sign flip for d=1, `oap_eig` for d>1;
    - "oap-eig": `oap_eig` everywhere (basis invariant, axis dependent);
    - "oap-lap" / "map" / "fa-lap": the summary-vector pipeline with the
      corresponding key variant (permutation equivariant);
    - "map-full": like "oap-lap" but d=1 spaces use `map_full`.

    Under the summary-vector methods a failed multiplicity-1 space
    degrades to the {u, -u} fallback when the vector is genuinely
    sign-symmetric; a failed space otherwise passes its raw basis
    through and is reported as "failed".  The first form of a fallback
    is the one concatenated.  If L has fewer than k_vectors columns the
    matrix is zero-padded on the right and flagged.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if k_vectors < 1:
        raise ValueError(f"canonicalize_pe: k_vectors must be >= 1, got {k_vectors}")

    variant_by_method = {"oap-lap": VARIANT_OAP, "map": VARIANT_MAP, "fa-lap": VARIANT_FA,
                         "map-full": VARIANT_OAP}
    known = {"sign-first", "oap-eig", *variant_by_method}
    if method not in known:
        raise ValueError(f"canonicalize_pe: unknown method {method!r}")

    spaces = sym_eig(L, tol)
    reports: list[SpaceReport] = []
    columns: list[np.ndarray] = []
    got = 0
    for space in spaces:
        if got >= k_vectors:
            break
        outcome = _canonicalize_space(space, method, variant_by_method, c, tol)
        reports.append(
            SpaceReport(
                eigenvalue=space.eigenvalue,
                dim=space.dim,
                kind=outcome.kind,
                method=outcome.method,
            )
        )
        form = outcome.forms[0]
        block = form[:, None] if form.ndim == 1 else form
        take = min(block.shape[1], k_vectors - got)
        columns.append(block[:, :take])
        got += take

    padded = got < k_vectors
    if padded:
        columns.append(np.zeros((n, k_vectors - got)))
    return PEResult(vectors=np.column_stack(columns), spaces=reports, padded=padded)


def _canonicalize_space(
    space: EigSpace,
    method: str,
    variant_by_method: dict[str, str],
    c: float | None,
    tol: Tolerances,
) -> CanonOutcome:
    d = space.dim
    if method == "sign-first":
        if d == 1:
            return sign_canon_first_nonzero(space.basis[:, 0], tol.eps_zero)
        return oap_eig(space.basis, tol)
    if method == "oap-eig":
        return oap_eig(space.basis, tol)

    variant = variant_by_method[method]
    if method == "map-full" and d == 1:
        return map_full(space.basis[:, 0], variant=variant, c=c, tol=tol)

    outcome = oap_lap(space.basis, variant=variant, c=c, tol=tol)
    if outcome.ok or d > 1:
        return outcome
    # multiplicity-1 rescue: a genuinely sign-symmetric vector gets the
    # two-sided fallback; anything else keeps the failed status.
    u = space.basis[:, 0]
    if is_sign_uncanonicalizable(u, tol.tau_quant):
        return map_full(u, variant=VARIANT_OAP, c=c, tol=tol)
    return outcome
