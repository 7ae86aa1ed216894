"""Canonicalization of eigenvectors under sign and basis ambiguity.

An eigenvector is only defined up to sign, and a degenerate eigenspace
only up to an orthogonal change of basis.  The routines here pick a
deterministic representative:

- ``sign_canon_first_nonzero``: flip a vector so its first nonzero
  entry is positive (not permutation-equivariant).
- ``oap_eig``: canonical orthonormal basis of a d-dimensional space,
  depending only on the span (basis invariant).
- ``map_full``: sign canonicalization that degrades gracefully; when no
  permutation-equivariant sign choice exists it returns the two-element
  fallback set {u, -u} instead of failing.

Outcomes are values, not exceptions: `CanonOutcome.kind` distinguishes
a unique form, a fallback set, and failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import DEFAULT_TOL, Tolerances, gram_schmidt, projection_of, residual_accept

KIND_SINGLE = "single"
KIND_FALLBACK = "fallback"
KIND_FAILED = "failed"


@dataclass(frozen=True)
class CanonOutcome:
    """Result of a canonicalization attempt.

    Attributes
    ----------
    kind : str
        One of "single" (unique canonical form), "fallback" (a small
        set of forms to average over), "failed" (no representative
        produced; `forms` may hold the raw input for pass-through).
    forms : list of ndarray
        The canonical form(s).  Vector inputs yield 1-d arrays, basis
        inputs (n, d) arrays.
    method : str
        Name of the producing routine, e.g. "oap-eig".
    witness : tuple of int, optional
        For scan-based methods, the 0-based indices of the accepted
        candidates (axes or summary-group ranks).
    detail : str
        Free-form diagnostics, mainly for "failed" outcomes.
    """

    kind: str
    forms: list = field(default_factory=list)
    method: str = ""
    witness: tuple = ()
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.kind != KIND_FAILED


def sign_canon_first_nonzero(
    u: np.ndarray, eps_zero: float = DEFAULT_TOL.eps_zero
) -> CanonOutcome:
    """Flip u, if needed, so its first entry larger than eps_zero in
    magnitude is positive.

    Example: [0, -2, 1] -> [0, 2, -1].  Raises on an all-zero vector
    since no sign decision is possible.
    """
    u = np.asarray(u, dtype=float).ravel()
    nonzero = np.flatnonzero(np.abs(u) > eps_zero)
    if nonzero.size == 0:
        raise ValueError(
            f"sign_canon_first_nonzero: all {u.size} entries are within "
            f"{eps_zero:.1e} of zero"
        )
    pivot = int(nonzero[0])
    form = -u if u[pivot] < 0 else u.copy()
    return CanonOutcome(
        kind=KIND_SINGLE, forms=[form], method="sign-first", witness=(pivot,)
    )


def oap_eig(U: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> CanonOutcome:
    """Canonical orthonormal basis of span(U), invariant to the basis given.

    Works on the projector P = U @ U.T, which is the same for every
    orthonormal basis of the span.  The columns P @ e_i are scanned in
    axis order and greedily accepted when they add a new direction
    (residual norm > tol.eps_rank); the first d accepted projections
    are orthonormalized in acceptance order.

    Always succeeds on a valid orthonormal basis: the n projector
    columns span the whole d-dimensional space, so the scan cannot run
    out of candidates.  Cost is O(n^2 d) for the scan after the O(n^2 d)
    projector build.

    Not permutation equivariant: relabeling the coordinates changes
    which axes are scanned first.  Use the summary-vector pipeline in
    `eigcanon.lappe` when permutation equivariance matters.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    n, d = U.shape
    P = projection_of(U)

    accepted: list[np.ndarray] = []
    witness: list[int] = []
    B: np.ndarray | None = None
    for i in range(n):
        v = P[:, i]
        ok, residual = residual_accept(v, B, tol.eps_rank)
        if not ok:
            continue
        accepted.append(v)
        witness.append(i)
        unit = residual / np.linalg.norm(residual)
        B = unit[:, None] if B is None else np.column_stack([B, unit])
        if len(accepted) == d:
            break

    if len(accepted) < d:
        raise RuntimeError(
            f"oap_eig: found only {len(accepted)} of {d} independent "
            "projections; this cannot happen for an orthonormal input basis"
        )
    form = gram_schmidt(np.column_stack(accepted), tol.eps_rank)
    return CanonOutcome(
        kind=KIND_SINGLE, forms=[form], method="oap-eig", witness=tuple(witness)
    )


def is_sign_uncanonicalizable(
    u: np.ndarray, tau_quant: float = DEFAULT_TOL.tau_quant
) -> bool:
    """True iff u and -u are indistinguishable up to a permutation.

    Equivalent to the quantized multisets of entries of u and -u being
    equal; when that holds, no permutation-equivariant rule can pick
    between the two signs.  Examples: [-1, 1] -> True, [2, 1, 0] ->
    False, [1, -1, 2, -2, 0] -> True.
    """
    u = np.asarray(u, dtype=float).ravel()
    q = np.rint(u / tau_quant).astype(np.int64)
    return bool(np.array_equal(np.sort(q), np.sort(-q)))


def map_full(
    u: np.ndarray,
    variant: str = "oap",
    c: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> CanonOutcome:
    """Sign canonicalization with an optimal fallback.

    If a permutation-equivariant sign choice exists (see
    `is_sign_uncanonicalizable`), returns it as a "single" outcome,
    computed with the summary-vector pipeline using the given key
    variant.  Otherwise returns the "fallback" pair {u, -u}, which is
    the smallest sign-invariant set containing the input.

    The returned forms keep the scale of the input vector.
    """
    from .lappe import oap_lap  # deferred import; lappe uses this module too

    u = np.asarray(u, dtype=float).ravel()
    norm = np.linalg.norm(u)
    if norm <= tol.eps_zero:
        raise ValueError("map_full: cannot canonicalize a zero vector")

    if is_sign_uncanonicalizable(u, tol.tau_quant):
        pair = sorted((u.copy(), -u), key=lambda w: tuple(np.rint(w / tol.tau_quant)))
        return CanonOutcome(
            kind=KIND_FALLBACK,
            forms=[pair[1], pair[0]],
            method=f"map-full({variant})",
            detail="sign-symmetric entry multiset; emitting both signs",
        )

    unit = u / norm
    inner = oap_lap(unit[:, None], variant=variant, c=c, tol=tol)
    if not inner.ok:
        raise RuntimeError(
            "map_full: summary-vector scan failed on a sign-canonicalizable "
            f"vector (variant={variant}); this violates the optimality "
            f"guarantee. Inner diagnostics: {inner.detail}"
        )
    sign = 1.0 if float(inner.forms[0].ravel() @ unit) >= 0 else -1.0
    return CanonOutcome(
        kind=KIND_SINGLE,
        forms=[sign * u],
        method=f"map-full({variant})",
        witness=inner.witness,
    )
