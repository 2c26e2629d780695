"""Graph structures, hop distances, and distance-decay co-clustering weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Network:
    """Undirected graph with optional node populations.

    Parameters
    ----------
    node_ids : list of str
        Node labels, in the row/column order of ``adjacency``.
    adjacency : ndarray of bool, shape (N, N)
        Symmetric adjacency matrix with a zero diagonal.
    population : ndarray, shape (N,), optional
        Strictly positive population per node.
    """

    node_ids: list[str]
    adjacency: np.ndarray
    population: np.ndarray | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        n = len(self.node_ids)
        if adj.shape != (n, n):
            raise ValueError(f"adjacency must be {n}x{n}, got {adj.shape}")
        if n < 1:
            raise ValueError("network needs at least one node")
        if np.any(np.diag(adj)):
            raise ValueError("adjacency diagonal must be zero")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", adj)
        if self.population is not None:
            pop = np.asarray(self.population, dtype=float)
            if pop.shape != (n,):
                raise ValueError(f"population must have length {n}")
            if np.any(pop <= 0) or not np.all(np.isfinite(pop)):
                raise ValueError("population entries must be positive and finite")
            object.__setattr__(self, "population", pop)

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def shortest_path_matrix(net: Network) -> np.ndarray:
    """All-pairs unweighted shortest-path hop counts.

    Runs one breadth-first search per node. Unreachable pairs are marked
    with ``np.inf``; the diagonal is 0.
    """
    n = net.n
    adj = net.adjacency
    neighbors = [np.flatnonzero(adj[i]) for i in range(n)]
    dist = np.full((n, n), np.inf)
    for source in range(n):
        d = dist[source]
        d[source] = 0.0
        frontier = [source]
        level = 0
        while frontier:
            level += 1
            nxt = []
            for u in frontier:
                for v in neighbors[u]:
                    if not np.isfinite(d[v]):
                        d[v] = level
                        nxt.append(v)
            frontier = nxt
    return dist


def ddp_weights(dist: np.ndarray, decay: float) -> np.ndarray:
    """Row-rescaled distance-decay weights for the co-clustering prior.

    Raw weights are ``exp(-decay * dist)``; pairs at infinite distance get
    raw weight 0 and the diagonal is 0. Each row is then rescaled so its
    off-diagonal entries sum to N - 1, which makes the new-cluster mass of
    the partition prior behave exactly as in the uniform-weight case.

    Parameters
    ----------
    dist : ndarray, shape (N, N)
        Hop distances from :func:`shortest_path_matrix`.
    decay : float
        Nonnegative decay rate; 0 gives uniform weights on connected pairs.

    Returns
    -------
    ndarray, shape (N, N)
        Weight matrix with zero diagonal and rows summing to N - 1. The
        result is generally not symmetric: only rows are normalized.

    Raises
    ------
    ValueError
        If some node is unreachable from every other node, which leaves
        its row with nothing to rescale.
    """
    d = np.asarray(dist, dtype=float)
    n = d.shape[0]
    if decay < 0:
        raise ValueError("decay must be nonnegative")
    raw = np.zeros_like(d)
    finite = np.isfinite(d)
    raw[finite] = np.exp(-decay * d[finite])
    np.fill_diagonal(raw, 0.0)
    row_sums = raw.sum(axis=1)
    if np.any(row_sums == 0):
        bad = int(np.flatnonzero(row_sums == 0)[0])
        raise ValueError(f"node {bad} is unreachable from every other node")
    return raw * ((n - 1) / row_sums)[:, None]
