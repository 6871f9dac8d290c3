"""Interaction digraphs, their Laplacians and the SCC block structure.

Convention throughout: ``adjacency[i, j] == 1`` means agent ``i`` receives
information from agent ``j``. Information therefore flows ``j -> i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NoSpanningTree, NotStronglyConnected

ZERO_TOL = 1e-12
EIGVEC_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Digraph:
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be exactly 0 or 1 (weighted graphs are not supported)")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency must have a zero diagonal (no self-loops)")
        object.__setattr__(self, "adjacency", _frozen(a))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Digraph":
        """Build from ``(receiver, source)`` pairs, 0-based."""
        a = np.zeros((n, n))
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) not allowed")
            if a[i, j]:
                raise ValueError(f"duplicate edge ({i}, {j})")
            a[i, j] = 1
        return cls(a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def in_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adjacency))]

    def sources(self, i: int) -> list[int]:
        """Neighbors agent ``i`` receives from."""
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def subgraph(self, agents: Sequence[int]) -> "Digraph":
        idx = np.asarray(agents, dtype=int)
        return Digraph(self.adjacency[np.ix_(idx, idx)])

    def __eq__(self, other):
        return isinstance(other, Digraph) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash(self.adjacency.tobytes())


def laplacian(g: Digraph) -> np.ndarray:
    return np.diag(g.in_degrees) - g.adjacency


def strongly_connected_components(g: Digraph) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Each component is sorted ascending."""
    n = g.n
    succ = [g.sources(i) for i in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def _condensation(g: Digraph):
    comps = strongly_connected_components(g)
    owner = np.empty(g.n, dtype=int)
    for c, members in enumerate(comps):
        owner[members] = c
    # feeds[c] = components that component c receives from
    feeds: list[set[int]] = [set() for _ in comps]
    for i, j in g.edges():
        if owner[i] != owner[j]:
            feeds[owner[i]].add(int(owner[j]))
    return comps, feeds


def is_strongly_connected(g: Digraph) -> bool:
    return len(strongly_connected_components(g)) == 1


def has_spanning_tree(g: Digraph) -> bool:
    # A spanning tree exists iff the condensation has exactly one closed SCC.
    _, feeds = _condensation(g)
    return sum(1 for f in feeds if not f) == 1


def left_eigenvector(block_laplacian: np.ndarray) -> np.ndarray:
    """Positive left null vector of a Laplacian, normalized to sum 1.

    Solves ``[L^T; 1^T] xi = [0; 1]`` in the least-squares sense, which is a
    consistent system exactly when zero is a simple eigenvalue.
    """
    L = np.asarray(block_laplacian, dtype=float)
    m = L.shape[0]
    if m == 1:
        return np.ones(1)
    if np.linalg.matrix_rank(L) != m - 1:
        raise NotStronglyConnected("zero is not a simple eigenvalue of the block Laplacian")
    system = np.vstack([L.T, np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    xi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    if np.any(xi <= ZERO_TOL):
        raise NotStronglyConnected("left null vector is not entrywise positive")
    residual = np.abs(xi @ L).max()
    if residual > EIGVEC_TOL:
        raise NotStronglyConnected(f"left eigenvector residual {residual:.3e} exceeds {EIGVEC_TOL}")
    return xi


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """SCC blocks of ``L`` reordered so the Laplacian is block upper triangular.

    Block ``k`` only receives from blocks ``j >= k``; the last block is the
    unique closed SCC. ``permutation[p]`` is the original agent at position ``p``.
    """

    permutation: tuple[int, ...]
    block_sizes: tuple[int, ...]
    reordered: np.ndarray
    tilde_blocks: tuple[np.ndarray, ...]
    h_diag: tuple[np.ndarray, ...]
    xi: tuple[np.ndarray, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.block_sizes)])))

    @property
    def K(self) -> int:
        return len(self.block_sizes)

    @property
    def closed_scc_index(self) -> int:
        return self.K - 1

    def members(self, k: int) -> tuple[int, ...]:
        return self.permutation[self.offsets[k]:self.offsets[k + 1]]

    def block(self, k: int, j: int) -> np.ndarray:
        o = self.offsets
        return self.reordered[o[k]:o[k + 1], o[j]:o[j + 1]]

    @property
    def blocks(self) -> dict[tuple[int, int], np.ndarray]:
        return {(k, j): self.block(k, j) for k in range(self.K) for j in range(k, self.K)}

    def block_of(self) -> np.ndarray:
        """Block index per original agent."""
        out = np.empty(len(self.permutation), dtype=int)
        for k in range(self.K):
            out[list(self.members(k))] = k
        return out


def condense(g: Digraph) -> SpectralDecomposition:
    comps, feeds = _condensation(g)
    closed = [c for c, f in enumerate(feeds) if not f]
    if len(closed) != 1:
        raise NoSpanningTree(f"condensation has {len(closed)} closed SCCs; a spanning tree needs exactly one")

    depth: dict[int, int] = {}

    def _depth(c: int) -> int:
        # longest receive-from chain down to the closed SCC
        if c not in depth:
            depth[c] = 0 if not feeds[c] else 1 + max(_depth(s) for s in feeds[c])
        return depth[c]

    for c in range(len(comps)):
        _depth(c)
    order = sorted(range(len(comps)), key=lambda c: (-depth[c], comps[c][0]))

    perm = tuple(a for c in order for a in comps[c])
    sizes = tuple(len(comps[c]) for c in order)
    L = laplacian(g)
    reordered = _frozen(L[np.ix_(perm, perm)])

    tilde, hs, xis = [], [], []
    offset = 0
    for m in sizes:
        Lkk = reordered[offset:offset + m, offset:offset + m]
        Lt = Lkk - np.diag(np.diag(Lkk))
        Lt = Lt - np.diag(Lt.sum(axis=1))
        tilde.append(_frozen(Lt))
        hs.append(_frozen(np.diag(Lkk) - np.diag(Lt)))
        xis.append(_frozen(left_eigenvector(Lt)))
        offset += m
    return SpectralDecomposition(perm, sizes, reordered, tuple(tilde), tuple(hs), tuple(xis))


@dataclass(frozen=True, eq=False)
class Gramians:
    R: np.ndarray
    U: np.ndarray
    lambda2: float
    mu_m: float
    xi: np.ndarray


def gramians(g: Digraph) -> Gramians:
    if not is_strongly_connected(g):
        raise NotStronglyConnected("gramians require a strongly connected digraph")
    L = laplacian(g)
    xi = left_eigenvector(L)
    Xi = np.diag(xi)
    R = 0.5 * (Xi @ L + L.T @ Xi)
    U = Xi - np.outer(xi, xi)
    lam = np.linalg.eigvalsh(R)
    mu = np.linalg.eigvalsh(U)
    lambda2 = float(lam[1]) if g.n > 1 else 0.0
    return Gramians(_frozen(R), _frozen(U), lambda2, float(mu[-1]), _frozen(xi))


def describe(decomp: SpectralDecomposition) -> str:
    """Plain-text block report (1-based agent labels)."""
    lines = [f"blocks: K={decomp.K}, sizes={list(decomp.block_sizes)}"]
    for k in range(decomp.K):
        agents = [a + 1 for a in decomp.members(k)]
        tag = " (closed)" if k == decomp.closed_scc_index else ""
        xi = ", ".join(f"{v:.6g}" for v in decomp.xi[k])
        hk = ", ".join(f"{v:g}" for v in decomp.h_diag[k])
        lines.append(f"  block {k + 1}{tag}: agents={agents} xi=[{xi}] H=[{hk}]")
    return "\n".join(lines)
