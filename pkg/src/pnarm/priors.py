"""Partition priors for the Gibbs sweep and the Gamma prior on coefficients.

Two partition priors are supported. The distance-dependent prior (DDP)
assigns a node to an existing cluster with mass equal to the sum of its
rescaled distance-decay weights to the cluster's members, and to a fresh
cluster with mass ``alpha``; with uniform weights this is the Chinese
restaurant process. The finite mixture prior fixes the number of
components and collapses Dirichlet mixture proportions into a
counts-plus-gamma0 rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class DdpHyper:
    """Distance-dependent prior: new-cluster mass and distance decay rate."""

    alpha: float
    decay: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.decay < 0:
            raise ValueError("decay must be nonnegative")


@dataclass(frozen=True)
class FmmHyper:
    """Finite mixture prior: fixed component count and Dirichlet mass gamma0."""

    components: int
    gamma0: float = 1.0

    def __post_init__(self):
        if self.components < 1:
            raise ValueError("components must be at least 1")
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")


class PartitionState:
    """Cluster labels with occupancy bookkeeping.

    In canonical mode labels are kept contiguous in {1, ..., k} with every
    label used; removing the last member of a cluster deletes it and shifts
    higher labels down. With ``fixed_k`` set, labels live in {1, ..., K}
    for a fixed K, empty clusters are allowed, and no relabelling happens
    (the state used by the fixed-component sampler).

    Label 0 marks a node as currently unassigned (mid-update).
    """

    __slots__ = ("z", "counts", "fixed_k")

    def __init__(self, labels, fixed_k: int | None = None):
        z = np.asarray(labels, dtype=np.int64).copy()
        if z.ndim != 1 or z.size < 1:
            raise ValueError("labels must be a nonempty 1-D sequence")
        self.z = z
        self.fixed_k = fixed_k
        if fixed_k is None:
            self._check_canonical()
            k = int(z.max()) if z.size else 0
            self.counts = np.bincount(z, minlength=k + 1)[1:].astype(np.int64)
        else:
            if np.any((z < 1) | (z > fixed_k)):
                raise ValueError(f"labels must lie in 1..{fixed_k}")
            self.counts = np.bincount(z, minlength=fixed_k + 1)[1:].astype(np.int64)

    @classmethod
    def empty(cls, n: int, fixed_k: int | None = None) -> "PartitionState":
        """All nodes unassigned; used to seed sequential allocation."""
        state = object.__new__(cls)
        state.z = np.zeros(n, dtype=np.int64)
        state.fixed_k = fixed_k
        state.counts = np.zeros(0 if fixed_k is None else fixed_k, dtype=np.int64)
        return state

    def _check_canonical(self):
        z = self.z
        if np.any(z < 0):
            raise ValueError("labels must be nonnegative (0 marks unassigned)")
        assigned = z[z > 0]
        if assigned.size == 0:
            return
        k = int(assigned.max())
        if np.unique(assigned).size != k:
            raise ValueError("labels must be contiguous from 1 with no gaps")

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def k(self) -> int:
        """Number of occupied clusters."""
        if self.fixed_k is None:
            return len(self.counts)
        return int(np.count_nonzero(self.counts))

    @property
    def n_slots(self) -> int:
        """Number of label slots: k when canonical, fixed K otherwise."""
        return len(self.counts)

    def copy(self) -> "PartitionState":
        new = object.__new__(PartitionState)
        new.z = self.z.copy()
        new.counts = self.counts.copy()
        new.fixed_k = self.fixed_k
        return new

    def remove(self, i: int) -> tuple[int, bool]:
        """Unassign node i. Returns (old label, whether its cluster died).

        In canonical mode a dying cluster is deleted and labels above it
        shift down by one; in fixed-K mode the slot simply empties.
        """
        old = int(self.z[i])
        if old == 0:
            raise ValueError(f"node {i} is already unassigned")
        self.z[i] = 0
        self.counts[old - 1] -= 1
        died = self.counts[old - 1] == 0
        if died and self.fixed_k is None:
            self.counts = np.delete(self.counts, old - 1)
            self.z[self.z > old] -= 1
        return old, bool(died)

    def assign(self, i: int, label: int):
        """Assign node i to ``label``; in canonical mode k + 1 opens a cluster."""
        if self.z[i] != 0:
            raise ValueError(f"node {i} is already assigned")
        if self.fixed_k is None:
            k = len(self.counts)
            if label == k + 1:
                self.counts = np.append(self.counts, 0)
            elif not 1 <= label <= k:
                raise ValueError(f"label must be in 1..{k + 1}, got {label}")
        else:
            if not 1 <= label <= self.fixed_k:
                raise ValueError(f"label must be in 1..{self.fixed_k}, got {label}")
        self.z[i] = label
        self.counts[label - 1] += 1


def canonicalize_labels(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relabel clusters by first appearance in node order.

    Returns (canonical labels in 1..k, original label per canonical
    cluster) so aligned per-cluster arrays can be reordered to match.
    """
    z = np.asarray(labels, dtype=np.int64)
    mapping: dict[int, int] = {}
    out = np.empty_like(z)
    for i, lab in enumerate(z):
        lab = int(lab)
        if lab not in mapping:
            mapping[lab] = len(mapping) + 1
        out[i] = mapping[lab]
    order = np.array(sorted(mapping, key=mapping.get), dtype=np.int64)
    return out, order


def ddp_conditional(i: int, state: PartitionState, weights: np.ndarray, alpha: float) -> np.ndarray:
    """Conditional cluster-membership probabilities for node i under the DDP.

    ``state`` must have node i unassigned (label 0); any other subset of
    nodes may be assigned, so the same rule serves both the Gibbs full
    conditional (all other nodes assigned) and sequential allocation
    (earlier nodes only). Entry k is proportional to the summed weights
    from i into cluster k; the final entry, proportional to ``alpha``, is
    the probability of opening a new cluster.
    """
    if state.fixed_k is not None:
        raise ValueError("ddp_conditional needs a canonical partition state")
    if state.z[i] != 0:
        raise ValueError(f"node {i} must be unassigned")
    k = len(state.counts)
    z = state.z
    mass = np.zeros(k + 1)
    if z.size <= 32:  # scalar accumulation beats fancy indexing on tiny graphs
        w_i = weights[i]
        for j in range(z.size):
            lab = z[j]
            if lab > 0:
                mass[lab - 1] += w_i[j]
    else:
        assigned = z > 0
        mass[:k] = np.bincount(z[assigned] - 1, weights=weights[i, assigned], minlength=k)
    mass[k] = alpha
    return mass / mass.sum()


def fmm_conditional(i: int, labels: np.ndarray, components: int, gamma0: float = 1.0) -> np.ndarray:
    """Collapsed Dirichlet-multinomial conditional over a fixed label set.

    ``labels[i]`` is ignored; every other nonzero label must lie in
    {1, ..., components}. Component k gets mass (count of other nodes in
    k) + gamma0, normalized. Empty components stay available.
    """
    if components < 1:
        raise ValueError("components must be at least 1")
    z = np.asarray(labels, dtype=np.int64)
    others = np.delete(z, i)
    others = others[others > 0]
    if others.size and others.max() > components:
        raise ValueError(f"labels exceed component count {components}")
    mass = gamma0 + np.bincount(others - 1, minlength=components).astype(float)
    return mass / mass.sum()


class CoefficientPrior:
    """Independent Gamma(shape, rate) prior on each of the 3 coefficients."""

    def __init__(self, shape: float = 1.0, rate: float = 1.0):
        if shape <= 0 or rate <= 0:
            raise ValueError("shape and rate must be positive")
        self.shape = float(shape)
        self.rate = float(rate)
        self._log_norm = 3.0 * (shape * math.log(rate) - float(gammaln(shape)))

    def logpdf(self, theta: np.ndarray) -> float:
        t0, t1, t2 = float(theta[0]), float(theta[1]), float(theta[2])
        if t0 <= 0.0 or t1 <= 0.0 or t2 <= 0.0:
            return float("-inf")
        return (
            self._log_norm
            + (self.shape - 1.0) * (math.log(t0) + math.log(t1) + math.log(t2))
            - self.rate * (t0 + t1 + t2)
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.gamma(self.shape, 1.0 / self.rate, size=3)

    def sample_many(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.gamma(self.shape, 1.0 / self.rate, size=(m, 3))

    def __repr__(self):
        return f"CoefficientPrior(shape={self.shape}, rate={self.rate})"


class DiscreteCoefficientPrior:
    """Uniform prior over a finite set of coefficient triples.

    Used to validate the sampler against exact enumeration; the
    coefficient update becomes an exact Gibbs draw over the atoms.
    """

    def __init__(self, values):
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != 3:
            raise ValueError("values must have shape (n_atoms, 3)")
        if np.any(vals < 0):
            raise ValueError("coefficient atoms must be nonnegative")
        self.values = vals

    @property
    def n_atoms(self) -> int:
        return self.values.shape[0]

    def logpdf(self, theta: np.ndarray) -> float:
        th = np.asarray(theta, dtype=float)
        for row in self.values:
            if np.array_equal(row, th):
                return -np.log(self.n_atoms)
        return float("-inf")

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.values[rng.integers(self.n_atoms)].copy()

    def sample_many(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return self.values[rng.integers(self.n_atoms, size=m)].copy()

    def __repr__(self):
        return f"DiscreteCoefficientPrior({self.n_atoms} atoms)"
