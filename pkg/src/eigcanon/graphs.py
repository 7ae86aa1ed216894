"""Graph-level canonicalization: spectral node scores, sorting frames,
automorphism counting, and canonical relabeled sets.

A frame of a graph is the set of relabelings that sort its nodes by a
permutation-invariant score.  Tied scores leave freedom: the frame size
is the product of factorials of the tie-group sizes.  Applying every
frame element and deduplicating gives the canonical set, whose size
times the automorphism count equals the frame size exactly (the
counting identity checked in the tests).
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .lappe import VARIANT_FA, VARIANT_OAP, refinement_keys
from .linalg import DEFAULT_TOL, Tolerances, factorial_product, projection_of, sym_eig


@dataclass(frozen=True)
class Graph:
    """Undirected graph as a symmetric adjacency matrix with zero diagonal.

    Entries are 0/1 or positive real weights.  ``node_colors`` is an
    optional tuple of hashable labels, one per node.
    """

    adjacency: np.ndarray = field(repr=False)
    node_colors: tuple | None = None

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float) + 0.0  # normalize -0.0
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"Graph: adjacency must be square, got {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("Graph: adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValueError("Graph: self-loops are not supported")
        object.__setattr__(self, "adjacency", A)
        if self.node_colors is not None:
            if len(self.node_colors) != A.shape[0]:
                raise ValueError(
                    f"Graph: {len(self.node_colors)} colors for {A.shape[0]} nodes"
                )
            object.__setattr__(self, "node_colors", tuple(self.node_colors))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @staticmethod
    def from_edges(
        n: int,
        edges: list[tuple],
        node_colors: tuple | None = None,
    ) -> "Graph":
        """Build a graph from (u, v) or (u, v, weight) tuples, 0-indexed."""
        A = np.zeros((n, n))
        for e in edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if u == v:
                raise ValueError(f"Graph.from_edges: self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"Graph.from_edges: edge ({u}, {v}) out of range")
            A[u, v] = A[v, u] = w
        return Graph(A, node_colors)

    def relabel(self, perm: tuple) -> "Graph":
        """Graph with node perm[p] of self placed at position p."""
        idx = np.asarray(perm)
        A = self.adjacency[np.ix_(idx, idx)]
        colors = (
            tuple(self.node_colors[i] for i in perm)
            if self.node_colors is not None
            else None
        )
        return Graph(A, colors)


def parse_edge_list(text: str) -> Graph:
    """Parse the plain-text edge-list format.

    One edge per line: "u v" with an optional third weight token,
    0-indexed.  Directive lines start with "#":

    - "# color i c" assigns color label c to node i;
    - "# n k" declares k nodes (for isolated trailing nodes);
    - any other "#" line is a comment.

    The node count is the maximum declared or referenced index plus
    one.  If any color directive appears, every node needs one.
    """
    edges: list[tuple] = []
    colors: dict[int, str] = {}
    declared_n = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["color"]:
                if len(parts) != 3:
                    raise ValueError(f"line {lineno}: expected '# color i c'")
                colors[int(parts[1])] = parts[2]
            elif parts[:1] == ["n"]:
                if len(parts) != 2:
                    raise ValueError(f"line {lineno}: expected '# n k'")
                declared_n = int(parts[1])
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(
                f"line {lineno}: expected 'u v' or 'u v w', got {raw!r}"
            )
        u, v = int(parts[0]), int(parts[1])
        if len(parts) == 3:
            edges.append((u, v, float(parts[2])))
        else:
            edges.append((u, v))
    if not edges and not declared_n and not colors:
        raise ValueError("empty edge list: no edges, nodes, or colors declared")
    n = declared_n
    for e in edges:
        n = max(n, e[0] + 1, e[1] + 1)
    if colors:
        n = max(n, max(colors) + 1)
        missing = [i for i in range(n) if i not in colors]
        if missing:
            raise ValueError(f"nodes without a color directive: {missing}")
        tup = tuple(colors[i] for i in range(n))
    else:
        tup = None
    return Graph.from_edges(n, edges, tup)


def load_graph(path: str) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh.read())


def normalized_laplacian(g: Graph) -> np.ndarray:
    """L = I - D^{-1/2} A D^{-1/2}, with D^{-1/2} = 0 on isolated nodes.

    The empty graph therefore maps to the identity matrix.
    """
    A = g.adjacency
    deg = A.sum(axis=1)
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    L = np.eye(g.n) - (dinv[:, None] * A) * dinv[None, :]
    return (L + L.T) / 2.0


def score_matrix(
    g: Graph, variant: str = VARIANT_FA, tol: Tolerances = DEFAULT_TOL
) -> np.ndarray:
    """Permutation-equivariant node scores, one column per eigenspace.

    Eigenspaces of the normalized Laplacian are taken in ascending
    order.  The "fa" variant fills each column with the diagonal of the
    eigenspace projector; the "oap" variant with the integer rank of
    the node's refinement key within that space (0 = largest key).  If
    the graph is colored, a leading column holds the color's rank among
    the sorted distinct colors.
    """
    if variant not in (VARIANT_FA, VARIANT_OAP):
        raise ValueError(f"score_matrix: unknown variant {variant!r}")
    L = normalized_laplacian(g)
    spaces = sym_eig(L, tol)
    cols = []
    if g.node_colors is not None:
        order = {c: r for r, c in enumerate(sorted(set(g.node_colors)))}
        cols.append(np.array([float(order[c]) for c in g.node_colors]))
    for space in spaces:
        P = projection_of(space.basis)
        if variant == VARIANT_FA:
            cols.append(np.diag(P).copy())
        else:
            keys = refinement_keys(P, VARIANT_OAP, tol.tau_quant)
            rank_of = {k: r for r, k in enumerate(sorted(set(keys), reverse=True))}
            cols.append(np.array([float(rank_of[k]) for k in keys]))
    return np.column_stack(cols)


@dataclass(frozen=True)
class FrameSummary:
    """Tie structure of a graph's sorting frame.

    ``tie_groups`` lists the node sets with equal quantized score rows,
    in the row order a sorted relabeling uses; ``frame_size`` is the
    exact product of their factorials.
    """

    tie_groups: tuple
    frame_size: int
    variant: str

    def permutations(self):
        """Yield every frame element lazily.

        A frame element is a tuple perm with perm[p] = the original
        node placed at sorted position p.  Iteration is lexicographic
        within each tie group, outer product across groups in row
        order.
        """
        pools = [itertools.permutations(sorted(group)) for group in self.tie_groups]
        for combo in itertools.product(*pools):
            yield tuple(itertools.chain.from_iterable(combo))

    def permutation_at(self, index: int) -> tuple:
        """The index-th frame element under the same ordering as
        ``permutations`` (mixed-radix over per-group lexicographic
        ranks), without enumerating the frame."""
        if not 0 <= index < self.frame_size:
            raise IndexError(f"frame index {index} out of range")
        radices = [math.factorial(len(g)) for g in self.tie_groups]
        digits = []
        for r in reversed(radices):
            digits.append(index % r)
            index //= r
        digits.reverse()
        parts = [
            _unrank_permutation(sorted(group), digit)
            for group, digit in zip(self.tie_groups, digits)
        ]
        return tuple(itertools.chain.from_iterable(parts))


def _unrank_permutation(items: list, rank: int) -> list:
    """Lexicographic unranking (Lehmer code) of a permutation of items."""
    items = list(items)
    out = []
    for i in range(len(items), 0, -1):
        f = math.factorial(i - 1)
        idx, rank = divmod(rank, f)
        out.append(items.pop(idx))
    return out


def frame_of_graph(
    g: Graph, variant: str = VARIANT_FA, tol: Tolerances = DEFAULT_TOL
) -> FrameSummary:
    """Frame of all relabelings sorting the node scores.

    Nodes are grouped by their quantized score rows; a frame element
    places each group's members, in any order, into the group's block
    of sorted positions.  frame_size = product over groups of |group|!.
    """
    S = score_matrix(g, variant, tol)
    q = np.rint(S / tol.tau_quant).astype(np.int64)
    rows: dict[tuple, list[int]] = {}
    for i in range(g.n):
        rows.setdefault(tuple(int(x) for x in q[i]), []).append(i)
    ordered = sorted(rows)  # ascending row key = sorted position order
    groups = tuple(tuple(rows[key]) for key in ordered)
    return FrameSummary(
        tie_groups=groups,
        frame_size=factorial_product([len(gr) for gr in groups]),
        variant=variant,
    )


def automorphism_count(
    g: Graph,
    variant: str = VARIANT_OAP,
    node_limit: int = 10_000_000,
    tol: Tolerances = DEFAULT_TOL,
) -> int | None:
    """Exact automorphism count, or None when the search is too large.

    Automorphisms preserve every permutation-equivariant score, so the
    search runs over tie-group-respecting permutations only, with
    backtracking group by group.  If the frame size (the search-space
    bound) exceeds ``node_limit`` the count is reported as unknown
    rather than estimated.
    """
    summary = frame_of_graph(g, variant, tol)
    if summary.frame_size > node_limit:
        return None
    A = g.adjacency
    groups = [list(gr) for gr in summary.tie_groups]

    count = 0
    mapping = np.full(g.n, -1, dtype=int)
    placed: list[int] = []

    def backtrack(gi: int) -> None:
        nonlocal count
        if gi == len(groups):
            count += 1
            return
        members = groups[gi]
        for image in itertools.permutations(members):
            ok = True
            for a, b in zip(members, image):
                mapping[a] = b
            for a in members:
                b = mapping[a]
                for p in placed:
                    if A[a, p] != A[b, mapping[p]]:
                        ok = False
                        break
                if not ok:
                    break
                for a2 in members:
                    if A[a, a2] != A[b, mapping[a2]]:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                placed.extend(members)
                backtrack(gi + 1)
                del placed[-len(members):]
            for a in members:
                mapping[a] = -1

    backtrack(0)
    return count


@dataclass(frozen=True)
class CanonicalSet:
    """Distinct relabeled graphs reached by a frame.

    ``exhaustive`` is True when every frame element was applied; in
    sampled mode (frame larger than the budget) the set is a lower
    bound obtained from ``sample_size`` distinct frame elements drawn
    without replacement.
    """

    graphs: list = field(repr=False)
    multiplicities: list
    exhaustive: bool
    frame_size: int
    sample_size: int | None = None
    actions: list = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return len(self.graphs)


def canonical_set(
    g: Graph,
    variant: str = VARIANT_FA,
    budget: int = 100_000,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
) -> CanonicalSet:
    """Apply the frame and deduplicate the relabeled graphs.

    When the frame fits in ``budget`` the enumeration is exhaustive and
    the multiset of relabelings is fully accounted; every multiplicity
    then equals the automorphism count.  Larger frames are sampled
    without replacement (seeded), which flags the result as
    non-exhaustive.
    """
    summary = frame_of_graph(g, variant, tol)
    exhaustive = summary.frame_size <= budget
    if exhaustive:
        perms = summary.permutations()
    else:
        indices = sample_without_replacement(summary.frame_size, budget, seed)
        perms = (summary.permutation_at(i) for i in indices)

    seen: dict[bytes, int] = {}
    graphs: list[Graph] = []
    mult: list[int] = []
    actions: list[tuple] = []
    for perm in perms:
        h = g.relabel(perm)
        key = h.adjacency.tobytes()
        if h.node_colors is not None:
            key += repr(h.node_colors).encode()
        if key in seen:
            mult[seen[key]] += 1
        else:
            seen[key] = len(graphs)
            graphs.append(h)
            mult.append(1)
            actions.append(perm)
    return CanonicalSet(
        graphs=graphs,
        multiplicities=mult,
        exhaustive=exhaustive,
        frame_size=summary.frame_size,
        sample_size=None if exhaustive else budget,
        actions=actions,
    )


def sample_without_replacement(population_size: int, n: int, seed: int) -> list[int]:
    """Uniform n-subset of range(population_size), deterministic per seed.

    Handles population sizes beyond 2**63 (frame sizes grow as products
    of factorials), so this goes through Python's arbitrary-precision
    sampler rather than numpy.
    """
    if n < 0 or n > population_size:
        raise ValueError(
            f"sample_without_replacement: need 0 <= n <= {population_size}, got {n}"
        )
    return random.Random(seed).sample(range(population_size), n)


def concentration_bound(n: int, N: int, a: float, b: float, eps: float) -> float:
    """Tail bound for the mean of a without-replacement sample.

    For n draws without replacement from a population of N values in
    [a, b], the probability that the running sample mean (at any point
    from n to N-1 draws) exceeds the population mean by eps is at most

        exp(-2 n eps^2 / ((1 - n/N) (1 + 1/n) (b - a)^2)).

    Requires 1 <= n < N; at n = N the sample mean is exact and the
    bound degenerates, so that case is rejected.
    """
    if n < 1:
        raise ValueError(f"concentration_bound: n must be >= 1, got {n}")
    if n >= N:
        raise ValueError(
            f"concentration_bound: need n < N (got n={n}, N={N}); "
            "a full sample has no sampling error"
        )
    if b <= a:
        raise ValueError(f"concentration_bound: need b > a, got a={a}, b={b}")
    if eps < 0:
        raise ValueError(f"concentration_bound: eps must be >= 0, got {eps}")
    return float(
        math.exp(-2.0 * n * eps**2 / ((1.0 - n / N) * (1.0 + 1.0 / n) * (b - a) ** 2))
    )
