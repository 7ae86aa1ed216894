"""Averaging a backbone function over frames or canonical sets.

Frame averaging evaluates the backbone on every relabeling in a frame
and averages; canonical averaging evaluates it once per distinct
canonical form.  Both produce the same invariant function: each
canonical form appears in the frame with multiplicity equal to the
automorphism count, which cancels in the mean.  The canonical route is
cheaper by exactly that factor.

Equivariant backbones (output rows aligned with input nodes) are
supported by transporting each term back through the inverse of the
relabeling (or canonizing action) before averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eigvec import CanonOutcome, oap_eig, sign_canon_first_nonzero
from .graphs import CanonicalSet, FrameSummary, Graph, sample_without_replacement
from .linalg import DEFAULT_TOL, Tolerances, sym_eig

ACTION_INVARIANT = "invariant"
ACTION_SAME_AS_INPUT = "same-as-input"


@dataclass(frozen=True)
class Backbone:
    """A function to be averaged, with its output behavior declared.

    ``output_action`` is "invariant" when the output has no node axis
    (nothing to transport) and "same-as-input" when output row p
    describes input row p and must be carried back through relabelings.
    """

    fn: Callable
    output_action: str = ACTION_INVARIANT

    def __post_init__(self):
        if self.output_action not in (ACTION_INVARIANT, ACTION_SAME_AS_INPUT):
            raise ValueError(f"Backbone: unknown output_action {self.output_action!r}")


@dataclass(frozen=True)
class CanonizedInput:
    """One canonical form together with the action that produced it.

    ``action`` is a permutation tuple (form = input relabeled by it),
    a float sign for one-dimensional sign actions, or None when only
    invariant backbones will consume the form.
    """

    form: object
    action: object = None


def _transport_back(y: np.ndarray, action, n: int) -> np.ndarray:
    """Undo a row action on backbone output y."""
    if action is None:
        raise ValueError(
            "equivariant averaging needs canonizing actions, but a form "
            "was supplied without one"
        )
    if isinstance(action, (float, int)):
        return float(action) * y
    idx = list(action)
    z = np.empty_like(y)
    z[idx] = y
    return z


def frame_average(
    g: Graph,
    summary: FrameSummary,
    phi: Backbone,
    budget: int = 100_000,
    seed: int = 0,
) -> np.ndarray:
    """Mean of phi over the frame's relabelings of g.

    Exact when the frame fits in ``budget``; otherwise a seeded
    without-replacement sample of ``budget`` frame elements is used.
    """
    if summary.frame_size <= budget:
        perms = summary.permutations()
        count = summary.frame_size
    else:
        indices = sample_without_replacement(summary.frame_size, budget, seed)
        perms = (summary.permutation_at(i) for i in indices)
        count = budget

    acc = None
    for perm in perms:
        y = np.asarray(phi.fn(g.relabel(perm)), dtype=float)
        if phi.output_action == ACTION_SAME_AS_INPUT:
            y = _transport_back(y, perm, g.n)
        acc = y if acc is None else acc + y
    return acc / count


def canonical_average(
    canon: list[CanonizedInput] | CanonicalSet,
    phi: Backbone,
    budget: int = 100_000,
    seed: int = 0,
) -> np.ndarray:
    """Mean of phi over canonical forms.

    Accepts either a list of `CanonizedInput` (e.g. the {u, -u}
    fallback pair of a sign-symmetric eigenvector, where averaging an
    identity backbone yields the zero vector) or a `CanonicalSet` from
    the graph pipeline.  When the set exceeds ``budget`` a seeded
    subset is averaged.
    """
    if isinstance(canon, CanonicalSet):
        acts = canon.actions if canon.actions else [None] * len(canon.graphs)
        items = [
            CanonizedInput(form=h, action=a) for h, a in zip(canon.graphs, acts)
        ]
    else:
        items = list(canon)
    if not items:
        raise ValueError("canonical_average: empty canonical set")

    if len(items) > budget:
        picked = sample_without_replacement(len(items), budget, seed)
        items = [items[i] for i in picked]

    acc = None
    for item in items:
        y = np.asarray(phi.fn(item.form), dtype=float)
        if phi.output_action == ACTION_SAME_AS_INPUT:
            y = _transport_back(y, item.action, y.shape[0])
        acc = y if acc is None else acc + y
    return acc / len(items)


def canonized_pair(outcome: CanonOutcome) -> list[CanonizedInput]:
    """Wrap a sign-canonicalization outcome for `canonical_average`.

    Fallback outcomes yield both signed forms with +1/-1 actions;
    single outcomes yield one form.
    """
    if outcome.kind == "fallback":
        return [
            CanonizedInput(form=outcome.forms[0], action=1.0),
            CanonizedInput(form=outcome.forms[1], action=-1.0),
        ]
    return [CanonizedInput(form=outcome.forms[0], action=1.0)]


def pca_frame_apply(
    X: np.ndarray,
    h: Callable,
    tol: Tolerances = DEFAULT_TOL,
) -> np.ndarray:
    """Orthogonally equivariant model from a plain backbone h.

    Computes the covariance eigenbasis R of X (the classical PCA
    frame), fixes its sign/basis ambiguity, and returns
    ``h(X @ R) @ R.T``.  With the ambiguity fixed canonically,
    ``pca_frame_apply(X @ Q) == pca_frame_apply(X) @ Q`` for every
    orthogonal Q.

    The ambiguity lives in the score blocks X @ U per covariance
    eigenspace (U and U @ W span the same space, turning scores Y into
    Y @ W), so the canonical choice is computed there: the d=1 rule
    flips a score column so its first nonzero entry is positive
    (`sign_canon_first_nonzero`); d>1 blocks are symmetrically
    orthonormalized and canonicalized with `oap_eig`.  Both choices
    depend only on X itself, not on the coordinates the eigensolver
    happened to return, which is what makes the composite equivariant.

    Raises when a score block is numerically rank deficient (the data
    cannot disambiguate that eigenspace).
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    centered = X - X.mean(axis=0, keepdims=True)
    cov = centered.T @ centered
    spaces = sym_eig(cov, tol)

    blocks = []
    for space in spaces:
        U = space.basis
        Y = X @ U
        W, sing, Vt = np.linalg.svd(Y, full_matrices=False)
        if np.min(sing) <= tol.eps_rank:
            raise ValueError(
                "pca_frame_apply: score block of the eigenvalue-"
                f"{space.eigenvalue:.6g} covariance eigenspace is rank "
                f"deficient (smallest singular value {np.min(sing):.3e}); "
                "the data cannot resolve this eigenspace's basis"
            )
        N = W @ Vt  # orthonormal scores, transforming as Y does
        if space.dim == 1:
            O = sign_canon_first_nonzero(N[:, 0], tol.eps_zero).forms[0][:, None]
        else:
            O = oap_eig(N, tol).forms[0]
        blocks.append(U @ (N.T @ O))

    R = np.column_stack(blocks)
    return np.asarray(h(X @ R), dtype=float) @ R.T
