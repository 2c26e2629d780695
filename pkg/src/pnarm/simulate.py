"""Forward simulation from the generative model and from the partition priors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import Network, ddp_weights, shortest_path_matrix
from .model import RAW, network_lag_series, validate_counts
from .priors import DdpHyper, FmmHyper, PartitionState, canonicalize_labels, ddp_conditional

EXPLOSIVE_RATE = 1e6

# Below this rate counts are drawn by walking the pmf with a single uniform;
# above it, by Hormann's transformed rejection (PTRS). The split is fixed per
# rate so the consumed random stream, and hence the output, is reproducible.
_INVERSION_CUTOFF = 30.0


def poisson_draw(rate: float, rng: np.random.Generator) -> int:
    """One Poisson variate using only uniforms from ``rng``."""
    if rate < 0 or not math.isfinite(rate):
        raise ValueError(f"rate must be finite and nonnegative, got {rate}")
    if rate == 0.0:
        return 0
    if rate < _INVERSION_CUTOFF:
        return _poisson_inverse(rate, rng)
    return _poisson_ptrs(rate, rng)


def _poisson_inverse(rate: float, rng: np.random.Generator) -> int:
    u = rng.random()
    p = math.exp(-rate)
    cum = p
    k = 0
    while u > cum and k < 10_000:
        k += 1
        p *= rate / k
        cum += p
    return k


def _poisson_ptrs(rate: float, rng: np.random.Generator) -> int:
    # Transformed rejection with squeeze (Hormann 1993), valid for rate >= 10.
    log_rate = math.log(rate)
    b = 0.931 + 2.53 * math.sqrt(rate)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        u_shift = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / u_shift + b) * u + rate + 0.43))
        if u_shift >= 0.07 and v <= v_r:
            return k
        if k < 0 or (u_shift < 0.013 and v > u_shift):
            continue
        if math.log(v * inv_alpha / (a / (u_shift * u_shift) + b)) <= (
            k * log_rate - rate - math.lgamma(k + 1.0)
        ):
            return k


@dataclass(frozen=True)
class SimSpec:
    """Everything needed to simulate a count series forward.

    ``labels`` is a canonical cluster assignment, ``thetas`` the matching
    (K, 3) coefficient matrix. Counts at the first time step come from
    ``y_init`` or, when omitted, from Poisson(theta[z_i, 0] * v_i) draws.
    """

    network: Network
    labels: np.ndarray
    thetas: np.ndarray
    t_len: int
    y_init: np.ndarray | None = None
    mode: str = RAW
    c: float | None = None
    seed: int = 0

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        thetas = np.asarray(self.thetas, dtype=float)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "thetas", thetas)
        PartitionState(labels)  # validates canonical form
        k = int(labels.max())
        if thetas.shape != (k, 3):
            raise ValueError(f"thetas must have shape ({k}, 3), got {thetas.shape}")
        if np.any(thetas < 0):
            raise ValueError("coefficients must be nonnegative")
        if self.t_len < 2:
            raise ValueError("t_len must be at least 2")
        if labels.size != self.network.n:
            raise ValueError("labels length must match the network size")
        if self.y_init is not None:
            y0 = validate_counts(np.asarray(self.y_init).reshape(1, -1)).ravel()
            if y0.size != self.network.n:
                raise ValueError("y_init length must match the network size")
            object.__setattr__(self, "y_init", y0)


def simulate(spec: SimSpec) -> np.ndarray:
    """Draw an (N, T) count matrix from the generative model.

    Counts at each step are conditionally independent across nodes given
    the previous column; nodes are drawn in ascending order so the output
    is fully determined by the seed.
    """
    net = spec.network
    n, t_len = net.n, spec.t_len
    rng = np.random.default_rng(spec.seed)
    theta_by_node = spec.thetas[spec.labels - 1]  # (N, 3)

    if spec.mode == RAW:
        v = np.ones(n)
    else:
        if net.population is None:
            raise ValueError("population_adjusted simulation needs node populations")
        c = spec.c if spec.c is not None else float(np.mean(net.population))
        v = net.population / c

    y = np.zeros((n, t_len), dtype=np.int64)
    if spec.y_init is not None:
        y[:, 0] = spec.y_init
    else:
        init_rates = theta_by_node[:, 0] * v
        y[:, 0] = [poisson_draw(float(r), rng) for r in init_rates]

    warned = False
    for t in range(1, t_len):
        x_col = network_lag_series(y[:, t - 1 : t], net, spec.mode)[:, 0]
        rates = (
            theta_by_node[:, 0] * v
            + theta_by_node[:, 1] * x_col
            + theta_by_node[:, 2] * y[:, t - 1]
        )
        if not warned and rates.max() > EXPLOSIVE_RATE:
            warnings.warn(
                f"simulated rate exceeded {EXPLOSIVE_RATE:g} at step {t + 1}; "
                "the path may be explosive",
                RuntimeWarning,
                stacklevel=2,
            )
            warned = True
        for i in range(n):
            y[i, t] = poisson_draw(float(rates[i]), rng)
    return y


def simulate_prior_partition(
    network: Network,
    prior: DdpHyper | FmmHyper,
    rng: np.random.Generator,
    weights: np.ndarray | None = None,
) -> PartitionState:
    """Draw a partition by allocating nodes 1..N in ascending order.

    For the DDP each node joins an existing cluster with mass equal to its
    summed weights into that cluster's already-allocated members, or opens
    a new cluster with mass alpha. For the finite mixture the allocation
    follows the Dirichlet-multinomial urn. ``weights`` may be supplied to
    avoid recomputing shortest paths in tight loops.
    """
    n = network.n
    if isinstance(prior, DdpHyper):
        if weights is None:
            weights = ddp_weights(shortest_path_matrix(network), prior.decay)
        state = PartitionState.empty(n)
        for i in range(n):
            probs = ddp_conditional(i, state, weights, prior.alpha)
            state.assign(i, _pick(probs, rng))
        return state
    if isinstance(prior, FmmHyper):
        k, gamma0 = prior.components, prior.gamma0
        counts = np.zeros(k)
        labels = np.empty(n, dtype=np.int64)
        for i in range(n):
            probs = (counts + gamma0) / (i + k * gamma0)
            lab = _pick(probs, rng)
            labels[i] = lab
            counts[lab - 1] += 1
        canon, _ = canonicalize_labels(labels)
        return PartitionState(canon)
    raise TypeError(f"unsupported prior type {type(prior).__name__}")


def _pick(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Sample a 1-based index from a probability vector with one uniform."""
    r = rng.random() * probs.sum()
    acc = 0.0
    for idx, p in enumerate(probs):
        acc += p
        if r < acc:
            return idx + 1
    return len(probs)
