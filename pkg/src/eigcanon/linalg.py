"""Shared linear-algebra primitives: orthonormalization, eigenspace
extraction with eigenvalue grouping, rank tests, and seeded random
orthogonal/permutation matrices.

All routines work on plain ``numpy.ndarray`` objects.  Counting helpers
(`factorial_product`) return exact Python integers, never floats, so
they stay correct far beyond 2**53.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared across the canonicalization stack.

    Attributes
    ----------
    eps_eig : float
        Eigenvalues closer than this are merged into one eigenspace.
    eps_rank : float
        Residual norm below which a vector counts as linearly dependent.
    eps_zero : float
        Entries with absolute value below this count as zero for sign
        decisions.
    tau_quant : float
        Quantization grid used when comparing real keys for equality.
    """

    eps_eig: float = 1e-6
    eps_rank: float = 1e-8
    eps_zero: float = 1e-8
    tau_quant: float = 1e-6


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class EigSpace:
    """One eigenspace: a representative eigenvalue and an orthonormal basis.

    ``basis`` has shape (n, d) where d is the multiplicity after grouping
    nearby eigenvalues.  Columns are orthonormal within 1e-9.
    """

    eigenvalue: float
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.basis.shape[1]
        gram = self.basis.T @ self.basis
        if not np.allclose(gram, np.eye(d), atol=1e-9):
            raise ValueError(
                "EigSpace basis columns are not orthonormal "
                f"(max Gram deviation {np.max(np.abs(gram - np.eye(d))):.3e})"
            )

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def gram_schmidt(V: np.ndarray, eps_rank: float = DEFAULT_TOL.eps_rank) -> np.ndarray:
    """Orthonormalize the columns of V, preserving their order.

    Computed as a QR factorization with the sign of each column of Q
    flipped so the diagonal of R is positive; this matches classical
    Gram-Schmidt applied column by column.

    Parameters
    ----------
    V : ndarray, shape (n, d)
        Matrix with linearly independent columns.
    eps_rank : float
        A column whose component orthogonal to the previous columns has
        norm <= eps_rank is treated as dependent.

    Returns
    -------
    ndarray, shape (n, d)
        Orthonormal columns spanning the same space, in the same order.

    Raises
    ------
    ValueError
        If some column is (numerically) a combination of the previous
        ones; the message names the offending column.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    Q, R = np.linalg.qr(V)
    diag = np.diag(R).copy()
    for j, r in enumerate(np.abs(diag)):
        if r <= eps_rank:
            raise ValueError(
                f"gram_schmidt: column {j} is linearly dependent on columns "
                f"0..{j - 1} (residual norm {r:.3e} <= {eps_rank:.1e})"
            )
    signs = np.sign(diag)
    return Q * signs


def projection_of(U: np.ndarray) -> np.ndarray:
    """Orthogonal projector U @ U.T onto the column span of U.

    U must have orthonormal columns; the projector is independent of
    which orthonormal basis of the span is supplied.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    gram = U.T @ U
    if not np.allclose(gram, np.eye(U.shape[1]), atol=1e-7):
        raise ValueError("projection_of: columns of U are not orthonormal")
    return U @ U.T


def sym_eig(S: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> list[EigSpace]:
    """Eigendecompose a symmetric matrix into grouped eigenspaces.

    Eigenvalues are sorted ascending and neighbors closer than
    ``tol.eps_eig`` are merged into a single eigenspace (merging is
    transitive along a chain of close eigenvalues).  Each returned basis
    pools the eigh eigenvectors of its group, so bases of distinct
    spaces are mutually orthogonal.

    Parameters
    ----------
    S : ndarray, shape (n, n)
        Symmetric matrix (within 1e-9).
    tol : Tolerances
        Only ``eps_eig`` is used here.

    Returns
    -------
    list of EigSpace
        Ascending by eigenvalue; the reported eigenvalue of a group is
        the mean of its members.
    """
    S = np.asarray(S, dtype=float)
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"sym_eig: expected a square matrix, got {S.shape}")
    if not np.allclose(S, S.T, atol=1e-9):
        raise ValueError("sym_eig: input matrix is not symmetric within 1e-9")
    evals, evecs = np.linalg.eigh(S)

    spaces: list[EigSpace] = []
    start = 0
    for i in range(1, len(evals) + 1):
        if i == len(evals) or evals[i] - evals[i - 1] > tol.eps_eig:
            group = slice(start, i)
            spaces.append(
                EigSpace(
                    eigenvalue=float(np.mean(evals[group])),
                    basis=evecs[:, group].copy(),
                )
            )
            start = i
    return spaces


def residual_accept(
    v: np.ndarray, B: np.ndarray | None, eps_rank: float = DEFAULT_TOL.eps_rank
) -> tuple[bool, np.ndarray]:
    """Test whether v adds a new direction beyond the span of B's columns.

    Parameters
    ----------
    v : ndarray, shape (n,)
        Candidate vector.
    B : ndarray of shape (n, m), or None
        Orthonormal basis accepted so far; None or zero columns means
        the empty span.
    eps_rank : float
        Acceptance threshold on the residual norm.

    Returns
    -------
    (accepted, residual)
        ``accepted`` is True iff ``norm(v - B @ B.T @ v) > eps_rank``;
        the residual vector is returned either way.
    """
    v = np.asarray(v, dtype=float)
    if B is None or B.size == 0:
        residual = v.copy()
    else:
        residual = v - B @ (B.T @ v)
    return bool(np.linalg.norm(residual) > eps_rank), residual


def random_orthogonal(k: int, seed: int) -> np.ndarray:
    """Draw a k x k orthogonal matrix, Haar-distributed, deterministic per seed.

    Uses QR of a standard normal matrix with the columns of Q rescaled
    so the diagonal of R is positive, which makes the QR map measurable
    and the output Haar.
    """
    if k < 1:
        raise ValueError(f"random_orthogonal: k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((k, k))
    Q, R = np.linalg.qr(Z)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def random_permutation(n: int, seed: int) -> np.ndarray:
    """Draw a uniform n x n permutation matrix, deterministic per seed."""
    if n < 1:
        raise ValueError(f"random_permutation: n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    P = np.zeros((n, n))
    P[perm, np.arange(n)] = 1.0
    return P


def factorial_product(sizes: list[int]) -> int:
    """Product of factorials of the given sizes, as an exact integer.

    factorial_product([5, 2, 2]) == 480; stays exact for inputs like
    [25] where floats would round.
    """
    out = 1
    for s in sizes:
        if s < 0:
            raise ValueError(f"factorial_product: sizes must be >= 0, got {s}")
        out *= math.factorial(s)
    return out
