"""Shared oracles and statistics utilities for the test suite.

Everything here is computed independently of the package's sampling paths:
closed forms, exhaustive enumeration, and exact finite-state transition
matrices, so tests compare two genuinely different routes to each value.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln


def set_partitions(n: int):
    """All canonical label tuples (labels 1..k by first appearance)."""

    def rec(prefix, kmax):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for lab in range(1, kmax + 2):
            yield from rec(prefix + [lab], max(kmax, lab))

    yield from rec([], 0)


def canon_tuple(labels) -> tuple:
    seen = {}
    out = []
    for lab in labels:
        lab = int(lab)
        if lab not in seen:
            seen[lab] = len(seen) + 1
        out.append(seen[lab])
    return tuple(out)


def crp_log_prob(labels, alpha: float) -> float:
    """Chinese-restaurant joint probability of a canonical partition."""
    labels = list(labels)
    n = len(labels)
    sizes = {}
    for lab in labels:
        sizes[lab] = sizes.get(lab, 0) + 1
    out = len(sizes) * math.log(alpha)
    for size in sizes.values():
        out += gammaln(size)  # (size-1)!
    for i in range(n):
        out -= math.log(alpha + i)
    return out


def fmm_label_log_prob(labels, components: int, gamma0: float) -> float:
    """Collapsed Dirichlet-multinomial probability of one label vector."""
    labels = list(labels)
    n = len(labels)
    counts = np.bincount(np.asarray(labels) - 1, minlength=components)
    out = gammaln(components * gamma0) - gammaln(n + components * gamma0)
    for c in counts:
        out += gammaln(c + gamma0) - gammaln(gamma0)
    return float(out)


def poisson_log_pmf(y, rate) -> float:
    """Scalar Poisson log-pmf, written independently of the package."""
    if rate == 0.0:
        return 0.0 if y == 0 else float("-inf")
    return y * math.log(rate) - rate - math.lgamma(y + 1.0)


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    x = np.asarray(x, dtype=float)
    usable = (len(x) // n_batches) * n_batches
    if usable < n_batches:
        raise ValueError("series too short for batch means")
    batches = x[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / math.sqrt(n_batches))


def iid_freq_se(p_hat: float, m: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / m)


# ---------------------------------------------------------------------------
# Exact machinery for the distance-dependent conditionals on small node sets.
# ---------------------------------------------------------------------------


def ddp_cond_probs(i: int, labels, weights: np.ndarray, alpha: float) -> np.ndarray:
    """Independent implementation of the co-clustering conditional.

    ``labels[j] = 0`` marks unallocated nodes; returns probabilities over
    the existing clusters of the others plus a final new-cluster entry.
    """
    labels = list(labels)
    k = max((lab for j, lab in enumerate(labels) if j != i and lab > 0), default=0)
    mass = [0.0] * (k + 1)
    for j, lab in enumerate(labels):
        if j != i and lab > 0:
            mass[lab - 1] += weights[i, j]
    mass[k] = alpha
    total = sum(mass)
    return np.array([m / total for m in mass])


def seq_alloc_log_prob(partition, weights: np.ndarray, alpha: float) -> float:
    """Probability of a canonical partition under in-order allocation."""
    partition = list(partition)
    n = len(partition)
    out = 0.0
    labels = [0] * n
    for i in range(n):
        probs = ddp_cond_probs(i, labels, weights, alpha)
        lab = partition[i]
        k_existing = probs.size - 1
        idx = lab - 1 if lab <= k_existing else k_existing
        out += math.log(probs[idx])
        labels[i] = lab
    return out


def scan_gibbs_stationary(weights: np.ndarray, alpha: float):
    """Exact stationary law of the systematic-scan label Gibbs kernel.

    Returns (list of partitions, stationary probabilities). The kernel
    updates nodes 0..n-1 in order from the co-clustering conditionals.
    """
    n = weights.shape[0]
    parts = list(set_partitions(n))
    index = {p: m for m, p in enumerate(parts)}
    kernel = np.eye(len(parts))
    for i in range(n):
        t_i = np.zeros((len(parts), len(parts)))
        for p in parts:
            labels = list(p)
            labels[i] = 0
            rest = canon_tuple([lab for j, lab in enumerate(labels) if j != i])
            relabeled = [0] * n
            pos = 0
            for j in range(n):
                if j != i:
                    relabeled[j] = rest[pos]
                    pos += 1
            probs = ddp_cond_probs(i, relabeled, weights, alpha)
            for choice, pr in enumerate(probs):
                new = list(relabeled)
                new[i] = choice + 1
                t_i[index[p], index[canon_tuple(new)]] += pr
        kernel = kernel @ t_i
    vals, vecs = np.linalg.eig(kernel.T)
    top = np.argmin(np.abs(vals - 1.0))
    stat = np.real(vecs[:, top])
    stat = stat / stat.sum()
    return parts, stat


def cocluster_from_partition_probs(parts, probs) -> np.ndarray:
    n = len(parts[0])
    out = np.zeros((n, n))
    for p, pr in zip(parts, probs):
        arr = np.asarray(p)
        out += pr * (arr[:, None] == arr[None, :])
    return out


def cocluster_freq(labels: np.ndarray) -> np.ndarray:
    """Empirical co-clustering frequency from an (M, N) label array."""
    acc = np.zeros((labels.shape[1], labels.shape[1]))
    for z in labels:
        acc += z[:, None] == z[None, :]
    return acc / labels.shape[0]


def pair_indicator_series(labels: np.ndarray, i: int, j: int) -> np.ndarray:
    return (labels[:, i] == labels[:, j]).astype(float)


def path_network(n: int):
    from pnarm import Network

    adj = np.zeros((n, n), dtype=bool)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = True
    return Network([f"n{i}" for i in range(n)], adj)


def complete_network(n: int):
    from pnarm import Network

    adj = ~np.eye(n, dtype=bool)
    return Network([f"n{i}" for i in range(n)], adj)


def random_connected_network(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3):
    """Random spanning tree plus extra edges; always connected."""
    from pnarm import Network

    adj = np.zeros((n, n), dtype=bool)
    nodes = rng.permutation(n)
    for idx in range(1, n):
        a = nodes[idx]
        b = nodes[rng.integers(idx)]
        adj[a, b] = adj[b, a] = True
    for i in range(n):
        for j in range(i + 1, n):
            if not adj[i, j] and rng.random() < extra_edge_prob:
                adj[i, j] = adj[j, i] = True
    return Network([f"n{i}" for i in range(n)], adj)
