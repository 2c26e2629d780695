"""Post-processing of posterior draws: co-clustering, partition selection,
and the one-step-ahead posterior predictive distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln, logsumexp

from .mcmc import PosteriorSamples


def cocluster_matrix(samples: PosteriorSamples) -> np.ndarray:
    """Fraction of draws in which each node pair shares a cluster.

    Symmetric with unit diagonal; invariant to relabelling within draws.
    """
    if samples.m < 1:
        raise ValueError("need at least one draw")
    labels = samples.labels
    n = labels.shape[1]
    acc = np.zeros((n, n), dtype=np.int64)
    for z in labels:
        acc += z[:, None] == z[None, :]
    return acc / labels.shape[0]


def partition_loss(labels: np.ndarray, c_hat: np.ndarray) -> float:
    """Squared deviation of one draw's co-membership pattern from c_hat,
    summed over ordered pairs i != j."""
    eq = (labels[:, None] == labels[None, :]).astype(float)
    diff = (eq - c_hat) ** 2
    np.fill_diagonal(diff, 0.0)
    return float(diff.sum())


def least_squares_partition(
    samples: PosteriorSamples, c_hat: np.ndarray | None = None
) -> tuple[int, np.ndarray]:
    """Draw index (0-based) whose partition best matches the co-clustering
    matrix, plus its labels. Ties go to the earliest draw."""
    if samples.m < 1:
        raise ValueError("need at least one draw")
    if c_hat is None:
        c_hat = cocluster_matrix(samples)
    losses = np.array([partition_loss(z, c_hat) for z in samples.labels])
    best = int(np.argmin(losses))
    return best, samples.labels[best].copy()


@dataclass(frozen=True)
class PredictiveDistribution:
    """Per-node mixture of Poisson pmfs over posterior draws.

    ``rates[m, i]`` is draw m's one-step-ahead rate for node i; ``weights``
    sum to 1 and default to uniform over draws.
    """

    rates: np.ndarray       # (M, N)
    weights: np.ndarray     # (M,)

    def __post_init__(self):
        if self.rates.ndim != 2:
            raise ValueError("rates must be (draws, nodes)")
        if self.weights.shape != (self.rates.shape[0],):
            raise ValueError("weights must have one entry per draw")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if np.any(self.rates < 0) or np.any(self.weights < 0):
            raise ValueError("rates and weights must be nonnegative")

    @property
    def n(self) -> int:
        return self.rates.shape[1]

    def pmf(self, i: int, y: int) -> float:
        if y < 0:
            return 0.0
        return float(mixture_pmf(self.rates[:, i], self.weights, np.asarray([y]))[0])

    def cdf(self, i: int, y: int) -> float:
        if y < 0:
            return 0.0
        return float(mixture_cdf(self.rates[:, i], self.weights, np.asarray([y]))[0])

    def point_forecast(self, i: int) -> float:
        """Predictive mean for node i."""
        return float(self.weights @ self.rates[:, i])

    def pmf_table(self, i: int, coverage: float = 0.9999, max_len: int = 100_000) -> np.ndarray:
        """pmf values from y = 0 up to the first y whose cdf reaches ``coverage``."""
        vals = []
        total = 0.0
        y = 0
        while total < coverage and y < max_len:
            p = self.pmf(i, y)
            vals.append(p)
            total += p
            y += 1
        return np.asarray(vals)


def poisson_log_pmf(y: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Elementwise Poisson log-pmf with the 0*log(0) = 0 convention."""
    y = np.asarray(y, dtype=float)
    rates = np.asarray(rates, dtype=float)
    safe = np.where(rates > 0.0, rates, 1.0)
    out = y * np.log(safe) - rates - gammaln(y + 1.0)
    return np.where((rates == 0.0) & (y > 0), -np.inf, out)


def mixture_pmf(rates: np.ndarray, weights: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Poisson-mixture pmf at integer points ``y``; rates shape (M,)."""
    logp = poisson_log_pmf(y[None, :], rates[:, None])  # (M, len(y))
    with np.errstate(divide="ignore"):
        out = logsumexp(logp, axis=0, b=weights[:, None])
    return np.where(np.asarray(y) < 0, 0.0, np.exp(out))


def mixture_cdf(rates: np.ndarray, weights: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Poisson-mixture cdf at integer points ``y``.

    Uses the regularized upper incomplete gamma identity for the Poisson
    cdf, so no explicit summation over the support is needed.
    """
    y = np.asarray(y, dtype=float)
    neg = y < 0
    y_safe = np.where(neg, 0.0, np.floor(y))
    per = gammaincc(y_safe[None, :] + 1.0, np.asarray(rates)[:, None])  # (M, len(y))
    out = weights @ per
    return np.where(neg, 0.0, np.minimum(out, 1.0))


def posterior_predictive(
    samples: PosteriorSamples,
    v: np.ndarray,
    x_last: np.ndarray,
    y_last: np.ndarray,
    weights: np.ndarray | None = None,
) -> PredictiveDistribution:
    """Mixture predictive at the next time step from retained draws.

    Each draw contributes the rate ``theta[z_i] . (v_i, x_last_i, y_last_i)``
    for every node. ``weights`` (for example from chain stacking after
    pooling draws) default to uniform.
    """
    if samples.m < 1:
        raise ValueError("need at least one draw")
    v = np.asarray(v, dtype=float)
    x_last = np.asarray(x_last, dtype=float)
    y_last = np.asarray(y_last, dtype=float)
    rates = predictive_rates(samples, v, x_last, y_last)
    if weights is None:
        weights = np.full(samples.m, 1.0 / samples.m)
    else:
        weights = np.asarray(weights, dtype=float)
    return PredictiveDistribution(rates=rates, weights=weights)


def predictive_rates(
    samples: PosteriorSamples,
    v: np.ndarray,
    x_vals: np.ndarray,
    y_vals: np.ndarray,
) -> np.ndarray:
    """Per-draw per-node rates for given predictor columns, shape (M, N)."""
    m = samples.m
    n = samples.n
    rates = np.empty((m, n))
    basis = np.stack([np.broadcast_to(v, (n,)),
                      np.broadcast_to(x_vals, (n,)),
                      np.broadcast_to(y_vals, (n,))], axis=1)  # (N, 3)
    for mi in range(m):
        theta_by_node = samples.thetas[mi][samples.labels[mi] - 1]  # (N, 3)
        rates[mi] = (theta_by_node * basis).sum(axis=1)
    return rates


def cell_predictive_rates(
    samples: PosteriorSamples,
    preds,
    counts: np.ndarray,
    t_set,
) -> np.ndarray:
    """In-sample one-step-ahead mixture rates for scoring, shape (M, N, L).

    ``t_set`` holds 1-based time indices in {2, ..., T}; cell (i, t) gets
    draw m's rate built from the predictors at t - 1.
    """
    y = np.asarray(counts)
    t_idx = np.asarray(list(t_set), dtype=int)
    if t_idx.size == 0:
        raise ValueError("t_set must be nonempty")
    if t_idx.min() < 2 or t_idx.max() > y.shape[1]:
        raise ValueError("t_set must lie within {2, ..., T}")
    cols = t_idx - 2
    m, n = samples.m, samples.n
    x = preds.x[:, cols]             # (N, L)
    ylag = y[:, cols].astype(float)  # (N, L)
    v = preds.v
    rates = np.empty((m, n, t_idx.size))
    for mi in range(m):
        th = samples.thetas[mi][samples.labels[mi] - 1]  # (N, 3)
        rates[mi] = th[:, 0:1] * v[:, None] + th[:, 1:2] * x + th[:, 2:3] * ylag
    return rates


def pooled_draws(
    chains: list[PosteriorSamples],
    chain_weights: np.ndarray | None = None,
) -> tuple[PosteriorSamples, np.ndarray]:
    """Concatenate chains into one draw set with per-draw mixture weights.

    Chain c's draws each carry weight ``chain_weights[c] / M_c``, so equal
    chain weights with equal lengths reduce to the uniform mixture.
    """
    if not chains:
        raise ValueError("need at least one chain")
    if chain_weights is None:
        chain_weights = np.full(len(chains), 1.0 / len(chains))
    chain_weights = np.asarray(chain_weights, dtype=float)
    if chain_weights.shape != (len(chains),):
        raise ValueError("one weight per chain required")
    labels = np.concatenate([s.labels for s in chains], axis=0)
    thetas = [th for s in chains for th in s.thetas]
    log_posts = np.concatenate([s.log_posts for s in chains])
    weights = np.concatenate(
        [np.full(s.m, w / s.m) for s, w in zip(chains, chain_weights)]
    )
    total_prop = sum(s.acceptance.proposed for s in chains)
    total_acc = sum(s.acceptance.accepted for s in chains)
    from .mcmc import AcceptanceStats

    pooled = PosteriorSamples(
        labels=labels,
        thetas=thetas,
        log_posts=log_posts,
        acceptance=AcceptanceStats(proposed=total_prop, accepted=total_acc),
    )
    return pooled, weights
