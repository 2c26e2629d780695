"""Observation model: predictor construction and the Poisson log-likelihood.

Each node i follows a conditionally Poisson autoregression whose mean at
time t combines an intercept predictor v_i, a network-lag predictor built
from the neighbours' previous counts, and the node's own previous count:

    rate(i, t) = theta[0] * v_i + theta[1] * x[i, t-1] + theta[2] * y[i, t-1]

Coefficient triples ``theta`` are nonnegative arrays of shape (3,).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

RAW = "raw"
POPULATION_ADJUSTED = "population_adjusted"

_MODES = (RAW, POPULATION_ADJUSTED)


def validate_counts(y: np.ndarray) -> np.ndarray:
    """Check and coerce an (N, T) matrix of nonnegative integer counts."""
    arr = np.asarray(y)
    if arr.ndim != 2:
        raise ValueError(f"counts must be 2-D (nodes x time), got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        as_int = np.asarray(arr, dtype=np.int64)
        if not np.array_equal(as_int, arr):
            raise ValueError("counts must be integer-valued")
        arr = as_int
    if np.any(arr < 0):
        raise ValueError("counts must be nonnegative")
    return arr.astype(np.int64, copy=False)


@dataclass(frozen=True)
class Predictors:
    """Intercept and network-lag predictors derived from counts and graph.

    ``x`` has one column per transition: ``x[:, j]`` is the network lag
    formed from counts at time index j (0-based), feeding the mean of the
    counts at time index j + 1.
    """

    v: np.ndarray        # (N,)
    x: np.ndarray        # (N, T-1)
    mode: str
    c: float

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")


def network_lag_series(counts: np.ndarray, net, mode: str) -> np.ndarray:
    """Network-lag predictor X_{i,t} for every time column of ``counts``.

    Returns an (N, T) matrix whose column t is computed from counts at
    time t. Callers slice off the last column when pairing lags with
    observed transitions, or keep it as the one-step-ahead predictor.
    """
    y = validate_counts(counts)
    n = net.n
    if y.shape[0] != n:
        raise ValueError(f"counts have {y.shape[0]} rows but network has {n} nodes")
    adj = net.adjacency.astype(float)
    deg = net.degrees.astype(float)
    safe_deg = np.where(deg > 0, deg, 1.0)
    if mode == RAW:
        x = (adj @ y) / safe_deg[:, None]
    elif mode == POPULATION_ADJUSTED:
        if net.population is None:
            raise ValueError("population_adjusted predictors need node populations")
        pop = net.population
        x = (pop / safe_deg)[:, None] * (adj @ (y / pop[:, None]))
    else:
        raise ValueError(f"mode must be one of {_MODES}")
    x[deg == 0] = 0.0  # isolated nodes carry no network signal
    return x


def build_predictors(counts: np.ndarray, net, mode: str = RAW, c: float | None = None) -> Predictors:
    """Build intercept and network-lag predictors for a count series.

    In ``raw`` mode the intercept predictor is 1 and the network lag is the
    unweighted mean of the neighbours' previous counts. In
    ``population_adjusted`` mode the intercept is population / c and the
    network lag rescales each neighbour's count by its own population.
    ``c`` defaults to the mean population across nodes.
    """
    y = validate_counts(counts)
    if mode == POPULATION_ADJUSTED:
        if net.population is None:
            raise ValueError("population_adjusted predictors need node populations")
        if c is None:
            c = float(np.mean(net.population))
        if c <= 0:
            raise ValueError("population scale c must be positive")
        v = net.population / c
    elif mode == RAW:
        c = 1.0 if c is None else float(c)
        if c <= 0:
            raise ValueError("population scale c must be positive")
        v = np.ones(net.n)
    else:
        raise ValueError(f"mode must be one of {_MODES}")
    x_all = network_lag_series(y, net, mode)
    return Predictors(v=v, x=x_all[:, :-1], mode=mode, c=float(c))


def horizon_inputs(counts: np.ndarray, net, mode: str = RAW, c: float | None = None):
    """Predictor inputs for the one-step-ahead forecast at time T + 1.

    Returns ``(v, x_last, y_last)`` where ``x_last`` is the network lag
    built from the final observed column and ``y_last`` is that column.
    """
    preds = build_predictors(counts, net, mode, c)
    x_all = network_lag_series(counts, net, mode)
    y = validate_counts(counts)
    return preds.v, x_all[:, -1], y[:, -1].astype(float)


def conditional_mean(theta: np.ndarray, v_i: float, x_prev: float, y_prev: float) -> float:
    """Poisson rate theta[0]*v + theta[1]*x + theta[2]*y_prev."""
    th = np.asarray(theta, dtype=float)
    return float(th[0] * v_i + th[1] * x_prev + th[2] * y_prev)


def node_log_likelihood(
    i: int,
    theta: np.ndarray,
    counts: np.ndarray,
    preds: Predictors,
    t_range=None,
) -> float:
    """Log-likelihood of node i's counts over a window of time steps.

    ``t_range`` holds 1-based time indices in {2, ..., T}; ``None`` means
    the full window. Each term is the Poisson log-pmf
    ``y*log(rate) - rate - log(y!)`` with the convention 0*log(0) = 0.
    Returns ``-inf`` when some rate is 0 while the count is positive.
    """
    y = validate_counts(counts)
    t_len = y.shape[1]
    if t_range is None:
        t_idx = np.arange(2, t_len + 1)
    else:
        t_idx = np.asarray(list(t_range), dtype=int)
        if t_idx.size and (t_idx.min() < 2 or t_idx.max() > t_len):
            raise ValueError("t_range must lie within {2, ..., T}")
    if t_idx.size == 0:
        return 0.0
    th = np.asarray(theta, dtype=float)
    cols = t_idx - 2
    y_cur = y[i, t_idx - 1].astype(float)
    lam = th[0] * preds.v[i] + th[1] * preds.x[i, cols] + th[2] * y[i, cols].astype(float)
    if np.any((lam == 0) & (y_cur > 0)):
        return float("-inf")
    safe = np.where(lam > 0, lam, 1.0)
    return float(np.sum(y_cur * np.log(safe) - lam - gammaln(y_cur + 1.0)))
