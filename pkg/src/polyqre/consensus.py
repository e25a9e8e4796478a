"""Communication graphs, the per-estimate mixing matrix, and averaging rounds.

Each player ``i`` keeps ``n_i`` estimates of the whole reduced joint
action. A cloud of estimates is an ``(n, n)`` array whose row ``e`` is the
estimate held at index ``e = (i, j)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import networkx as nx
import numpy as np


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class CommGraph:
    """Weighted undirected graph over players.

    ``W[i, k]`` is the weight on edge ``{i, k}`` (zero diagonal). Each row
    of ``W`` sums to ``1 - beta`` on regular graphs; on irregular graphs the
    shortfall ``row_deficit`` is absorbed as self-weight when the mixing
    matrix is extended.
    """

    N: int
    edges: tuple[tuple[int, int], ...]
    W: np.ndarray
    beta: float

    @property
    def row_deficit(self) -> np.ndarray:
        return (1.0 - self.beta) - self.W.sum(axis=1)


@dataclass(frozen=True)
class ExtendedMixing:
    matrix: np.ndarray
    dims: tuple[int, ...]
    diagonal_correction: np.ndarray = field(repr=False)

    @property
    def corrected(self) -> bool:
        """True when the printed weights alone were not row-stochastic."""
        return bool(np.any(self.diagonal_correction > 1e-15))


def _topology_edges(N: int, topology: str) -> list[tuple[int, int]]:
    if topology == "complete":
        return list(itertools.combinations(range(N), 2))
    if topology == "ring":
        if N <= 2:
            return list(itertools.combinations(range(N), 2))
        return sorted({tuple(sorted((i, (i + 1) % N))) for i in range(N)})
    if topology == "line":
        return [(i, i + 1) for i in range(N - 1)]
    raise GraphError(f"unknown topology {topology!r}")


def build_graph(N: int, topology="complete", beta: float = 0.5, edges=None, weights=None) -> CommGraph:
    """Build a connected communication graph with symmetric weights.

    Weights default to Metropolis weights ``1 / (1 + max(d_i, d_k))``,
    rescaled so the heaviest row carries exactly ``1 - beta``. Explicit
    ``weights`` (one per edge) are used as given.
    """
    if N < 1:
        raise GraphError("need at least one node")
    if not 0 < beta < 1:
        raise GraphError(f"beta must lie in (0, 1), got {beta}")
    if topology == "custom" or edges is not None:
        if edges is None:
            raise GraphError("custom topology needs an edge list")
        edge_list = [tuple(sorted((int(a), int(b)))) for a, b in edges]
    else:
        edge_list = _topology_edges(N, topology)
    for a, b in edge_list:
        if a == b or not (0 <= a < N and 0 <= b < N):
            raise GraphError(f"invalid edge ({a}, {b})")
    edge_list = sorted(set(edge_list))

    g = nx.Graph()
    g.add_nodes_from(range(N))
    g.add_edges_from(edge_list)
    if not nx.is_connected(g):
        raise GraphError("communication graph is not connected")

    W = np.zeros((N, N))
    if weights is not None:
        if len(weights) != len(edge_list):
            raise GraphError("need exactly one weight per edge")
        for (a, b), w in zip(edge_list, weights):
            if w <= 0:
                raise GraphError(f"edge ({a}, {b}) has non-positive weight {w}")
            W[a, b] = W[b, a] = float(w)
        if np.any(W.sum(axis=1) > 1 - beta + 1e-12):
            raise GraphError("explicit weights exceed 1 - beta on some row")
    elif edge_list:
        deg = np.array([g.degree(i) for i in range(N)])
        for a, b in edge_list:
            W[a, b] = W[b, a] = 1.0 / (1.0 + max(deg[a], deg[b]))
        W *= (1.0 - beta) / W.sum(axis=1).max()
    return CommGraph(N, tuple(edge_list), W, float(beta))


def extend(graph: CommGraph, dims) -> ExtendedMixing:
    """Mixing matrix over estimate indices.

    First estimates of adjacent players are linked with the graph weight,
    all estimates of one player share ``beta / n_i``, and each diagonal
    entry then receives whatever its row lacks to sum to one.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != graph.N:
        raise GraphError(f"{len(dims)} players in dims, graph has {graph.N}")
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    n = int(offsets[-1])
    M = np.zeros((n, n))
    for i in range(graph.N):
        if dims[i]:
            M[offsets[i]:offsets[i + 1], offsets[i]:offsets[i + 1]] = graph.beta / dims[i]
    for a in range(graph.N):
        for b in range(graph.N):
            if a != b and dims[a] and dims[b] and graph.W[a, b] > 0:
                M[offsets[a], offsets[b]] = graph.W[a, b]
    correction = 1.0 - M.sum(axis=1)
    if np.any(correction < -1e-12):
        raise GraphError("mixing rows exceed one before correction")
    correction = np.maximum(correction, 0.0)
    M[np.diag_indices(n)] += correction
    if not np.allclose(M, M.T, atol=1e-15):
        raise GraphError("extended mixing matrix is not symmetric")
    M.setflags(write=False)
    return ExtendedMixing(M, dims, correction)


def mix(M, cloud) -> np.ndarray:
    """One synchronous averaging round."""
    matrix = M.matrix if isinstance(M, ExtendedMixing) else np.asarray(M)
    return matrix @ np.asarray(cloud, dtype=float)


def disagreement(cloud) -> float:
    """Largest sup-norm distance between any two estimates."""
    X = np.asarray(cloud, dtype=float)
    if X.shape[0] < 2:
        return 0.0
    return float(np.max(X.max(axis=0) - X.min(axis=0)))


def second_eigenvalue(M) -> float:
    """Second-largest eigenvalue modulus of a symmetric stochastic matrix."""
    matrix = M.matrix if isinstance(M, ExtendedMixing) else np.asarray(M)
    if matrix.shape[0] < 2:
        return 0.0
    mods = np.sort(np.abs(np.linalg.eigvalsh(matrix)))[::-1]
    return float(mods[1])
