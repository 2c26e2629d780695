"""Probabilistic forecast evaluation: log score, scaled errors, randomized
PIT, and validation-set chain stacking."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .posterior import mixture_cdf, mixture_pmf


@dataclass(frozen=True)
class ScoreReport:
    """Mean negative log predictive mass with the per-cell breakdown.

    Cells whose observation has zero predictive mass score +inf; they are
    excluded from the mean and counted in ``n_zero_mass``.
    """

    mean_log_score: float
    per_cell: np.ndarray    # (N, L)
    t_set: tuple
    n_zero_mass: int


def log_score(rates: np.ndarray, weights: np.ndarray, y_obs: np.ndarray, t_set) -> ScoreReport:
    """Logarithmic score of Poisson-mixture predictives on observed cells.

    ``rates`` has shape (M, N, L) with one mixture per cell, ``y_obs`` is
    the matching (N, L) observation block, and the per-cell score is
    -log p(y), equivalently -log(P(y) - P(y - 1)) through the cdf.
    """
    rates = np.asarray(rates, dtype=float)
    y_obs = np.asarray(y_obs)
    m, n, l = rates.shape
    if y_obs.shape != (n, l):
        raise ValueError(f"observations must be ({n}, {l}), got {y_obs.shape}")
    per_cell = np.empty((n, l))
    for i in range(n):
        for j in range(l):
            p = mixture_pmf(rates[:, i, j], weights, np.asarray([y_obs[i, j]]))[0]
            per_cell[i, j] = np.inf if p <= 0.0 else -np.log(p)
    finite = np.isfinite(per_cell)
    n_zero = int((~finite).sum())
    if n_zero:
        warnings.warn(
            f"{n_zero} cells had zero predictive mass and were excluded from the mean",
            RuntimeWarning,
            stacklevel=2,
        )
    mean = float(per_cell[finite].mean()) if finite.any() else float("inf")
    return ScoreReport(
        mean_log_score=mean,
        per_cell=per_cell,
        t_set=tuple(int(t) for t in t_set),
        n_zero_mass=n_zero,
    )


def mase(
    forecasts: np.ndarray,
    y_true: np.ndarray,
    y_train: np.ndarray,
) -> tuple[np.ndarray, float, int]:
    """Mean absolute scaled error of point forecasts.

    Each node's absolute error is scaled by the in-sample mean absolute
    one-step naive error of its training series. Nodes whose training
    series is constant have an undefined scale and are excluded (NaN in
    the per-node output) with a warning.

    Returns (per-node scaled errors, mean over defined nodes, number
    excluded).
    """
    forecasts = np.asarray(forecasts, dtype=float)
    y_true = np.asarray(y_true, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    if y_train.ndim != 2 or y_train.shape[1] < 3:
        raise ValueError("training series needs at least 3 time steps")
    n = y_train.shape[0]
    if forecasts.shape != (n,) or y_true.shape != (n,):
        raise ValueError("forecasts and truths must be one value per node")
    denom = np.abs(np.diff(y_train, axis=1)).mean(axis=1)
    scaled = np.full(n, np.nan)
    defined = denom > 0
    if not defined.any():
        raise ValueError("every node has a constant training series; MASE undefined")
    scaled[defined] = np.abs(y_true[defined] - forecasts[defined]) / denom[defined]
    n_undef = int((~defined).sum())
    if n_undef:
        warnings.warn(
            f"{n_undef} nodes had constant training series and were excluded",
            RuntimeWarning,
            stacklevel=2,
        )
    return scaled, float(scaled[defined].mean()), n_undef


def randomized_pit(
    rates: np.ndarray,
    weights: np.ndarray,
    y: int,
    rng: np.random.Generator,
) -> float:
    """One randomized PIT value: uniform on [P(y - 1), P(y)].

    Under a predictive distribution matching the data-generating process
    these are standard uniform.
    """
    if y < 0:
        raise ValueError("observations must be nonnegative")
    lo_hi = mixture_cdf(np.asarray(rates, dtype=float), np.asarray(weights), np.asarray([y - 1, y]))
    lo, hi = float(lo_hi[0]), float(lo_hi[1])
    return lo + rng.random() * (hi - lo)


def randomized_pit_cells(
    rates: np.ndarray,
    weights: np.ndarray,
    y_obs: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Randomized PITs for a (N, L) block of cells with (M, N, L) mixture rates.

    Cells are visited in row-major order, one uniform each, so output is
    reproducible for a given generator state.
    """
    rates = np.asarray(rates, dtype=float)
    y_obs = np.asarray(y_obs)
    m, n, l = rates.shape
    out = np.empty((n, l))
    for i in range(n):
        for j in range(l):
            out[i, j] = randomized_pit(rates[:, i, j], weights, int(y_obs[i, j]), rng)
    return out


def pit_histogram(us: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width histogram counts of PIT values on [0, 1]."""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    us = np.asarray(us, dtype=float).ravel()
    counts, _ = np.histogram(us, bins=bins, range=(0.0, 1.0))
    return counts


def stacking_weights(
    pmf_values: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Simplex weights maximizing validation log predictive density.

    ``pmf_values[c, j]`` is chain c's predictive mass at validation cell j.
    Fixed-point multiplicative updates (the EM step for mixture weights)
    run from the uniform start until the relative objective change drops
    below ``tol``. The objective is concave, so this converges to the
    optimum.
    """
    p = np.asarray(pmf_values, dtype=float)
    if p.ndim != 2:
        raise ValueError("pmf_values must be (chains, cells)")
    c, n_cells = p.shape
    if n_cells < 1:
        raise ValueError("need at least one validation cell")
    if np.any(p < 0):
        raise ValueError("predictive masses must be nonnegative")
    if np.any(p.max(axis=0) <= 0.0):
        raise ValueError("some validation cell has zero mass under every chain")
    if c == 1:
        return np.ones(1)
    w = np.full(c, 1.0 / c)
    mix = w @ p
    obj = np.log(mix).sum()
    for _ in range(max_iter):
        w = w * (p / mix).mean(axis=1)
        w /= w.sum()
        mix = w @ p
        new_obj = np.log(mix).sum()
        if abs(new_obj - obj) <= tol * max(1.0, abs(obj)):
            obj = new_obj
            break
        obj = new_obj
    return w


def stacking_objective(weights: np.ndarray, pmf_values: np.ndarray) -> float:
    """Validation log predictive density of a weight vector."""
    mix = np.asarray(weights, dtype=float) @ np.asarray(pmf_values, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.log(mix).sum())
