"""Posterior sampler: label Gibbs sweeps alternating with coefficient updates.

A full iteration is one systematic sweep of cluster-label updates followed
by one sweep of coefficient updates. Under the distance-dependent prior the
label update uses the auxiliary-component device for non-conjugate mixture
likelihoods: the new-cluster mass alpha is split evenly over ``m`` fresh
coefficient triples drawn from the prior (a triple freed by removing the
last member of its cluster is retained as the first auxiliary, which is
what keeps the move reversible). Under the finite mixture prior every
component keeps an explicit coefficient triple; empty components have
their triples refreshed from the prior, which is their exact conditional.

Coefficients of occupied clusters move by random-walk Metropolis on the
log scale, jointly over the three coordinates, with the log-scale Jacobian
correction. A discrete coefficient prior switches that update to an exact
Gibbs draw over its atoms (used for validating the sampler against
enumeration).

``log_post`` caches the coefficient-prior terms of every triple held in
the state plus the total data log-likelihood. The partition-prior factor
is not included: the distance-dependent prior is specified only through
its conditionals, so it contributes no tractable joint term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .graph import Network, ddp_weights, shortest_path_matrix
from .model import Predictors, validate_counts
from .priors import (
    CoefficientPrior,
    DdpHyper,
    DiscreteCoefficientPrior,
    FmmHyper,
    PartitionState,
    canonicalize_labels,
)

logger = logging.getLogger(__name__)

ADAPT_TARGET = 0.25
_DRIFT_CHECK_EVERY = 100
_DRIFT_TOL = 1e-8
_STEP_BOUNDS = (1e-3, 10.0)


@dataclass
class McmcConfig:
    """Sampler schedule and tuning knobs."""

    iterations: int = 20_000
    burn_in: int = 10_000
    thinning: int = 10
    aux_components: int = 3
    rw_step: float = 0.5
    adapt: bool = True
    seed: int = 0
    chains: int = 1
    randomize_order: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if self.aux_components < 1:
            raise ValueError("aux_components must be at least 1")
        if self.rw_step <= 0:
            raise ValueError("rw_step must be positive")
        if self.chains < 1:
            raise ValueError("chains must be at least 1")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


class ModelData:
    """Per-node arrays laid out for fast likelihood evaluation.

    With a single time column there are no transitions to score and every
    log-likelihood is 0, which turns the sampler into a prior-only run.
    """

    def __init__(self, counts: np.ndarray, preds: Predictors):
        y = validate_counts(counts)
        n, t_len = y.shape
        if preds.v.shape != (n,) or preds.x.shape != (n, t_len - 1):
            raise ValueError("predictors do not match the count matrix")
        self.n = n
        self.t_len = t_len
        self.v = np.asarray(preds.v, dtype=float)
        self.x = np.asarray(preds.x, dtype=float)
        self.y_lag = y[:, :-1].astype(float)
        self.y_cur = y[:, 1:].astype(float)
        self.const = gammaln(self.y_cur + 1.0).sum(axis=1)
        self.has_data = t_len >= 2

    def node_loglik(self, i: int, theta: np.ndarray) -> float:
        if not self.has_data:
            return 0.0
        lam = theta[0] * self.v[i] + theta[1] * self.x[i] + theta[2] * self.y_lag[i]
        y = self.y_cur[i]
        if np.any((lam == 0.0) & (y > 0.0)):
            return float("-inf")
        safe = np.where(lam > 0.0, lam, 1.0)
        return float((y * np.log(safe) - lam).sum() - self.const[i])

    def node_loglik_many(self, i: int, thetas: np.ndarray) -> np.ndarray:
        """Log-likelihood of node i under each row of an (C, 3) matrix."""
        th = np.asarray(thetas, dtype=float)
        if not self.has_data:
            return np.zeros(th.shape[0])
        lam = (
            th[:, 0:1] * self.v[i]
            + th[:, 1:2] * self.x[i][None, :]
            + th[:, 2:3] * self.y_lag[i][None, :]
        )
        y = self.y_cur[i]
        bad = ((lam == 0.0) & (y > 0.0)).any(axis=1)
        safe = np.where(lam > 0.0, lam, 1.0)
        out = (y * np.log(safe) - lam).sum(axis=1) - self.const[i]
        out[bad] = -np.inf
        return out

    def members_loglik(self, members: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Per-node log-likelihoods for a set of nodes under one triple."""
        if not self.has_data:
            return np.zeros(len(members))
        v = self.v[members]
        x = self.x[members]
        ylag = self.y_lag[members]
        y = self.y_cur[members]
        lam = theta[0] * v[:, None] + theta[1] * x + theta[2] * ylag
        bad = ((lam == 0.0) & (y > 0.0)).any(axis=1)
        safe = np.where(lam > 0.0, lam, 1.0)
        out = (y * np.log(safe) - lam).sum(axis=1) - self.const[members]
        out[bad] = -np.inf
        return out


@dataclass
class ChainState:
    """Mutable sampler state: partition, coefficient triples, and caches."""

    partition: PartitionState
    thetas: list
    rng: np.random.Generator
    rw_step: float
    log_post: float = 0.0
    node_ll: np.ndarray = None
    accepted: int = 0
    proposed: int = 0
    ll_fallbacks: int = 0
    _dirty: bool = field(default=False, repr=False)

    def bump_log_post(self, delta: float):
        if self._dirty:
            return
        if math.isfinite(delta):
            self.log_post += delta
        else:
            self._dirty = True

    def refresh_log_post(self, model: ModelData, coeff_prior) -> float:
        self.log_post = recompute_log_post(self, model, coeff_prior)
        self._dirty = False
        return self.log_post


def recompute_log_post(state: ChainState, model: ModelData, coeff_prior) -> float:
    """Coefficient-prior terms plus total data log-likelihood, from scratch."""
    total = 0.0
    for theta in state.thetas:
        total += coeff_prior.logpdf(theta)
    z = state.partition.z
    for i in range(model.n):
        total += model.node_loglik(i, state.thetas[z[i] - 1])
    return total


def init_chain_state(
    labels,
    thetas,
    model: ModelData,
    coeff_prior,
    rng: np.random.Generator,
    rw_step: float = 0.5,
    fixed_k: int | None = None,
) -> ChainState:
    """Build a consistent ChainState from explicit labels and triples."""
    part = PartitionState(labels, fixed_k=fixed_k)
    expect = part.n_slots
    thetas = [np.asarray(th, dtype=float) for th in thetas]
    if len(thetas) != expect:
        raise ValueError(f"need {expect} coefficient triples, got {len(thetas)}")
    state = ChainState(partition=part, thetas=thetas, rng=rng, rw_step=rw_step)
    state.node_ll = np.array(
        [model.node_loglik(i, thetas[part.z[i] - 1]) for i in range(model.n)]
    )
    state.refresh_log_post(model, coeff_prior)
    return state


@dataclass(frozen=True)
class AcceptanceStats:
    proposed: int
    accepted: int

    @property
    def rate(self) -> float:
        if self.proposed == 0:
            return float("nan")
        return self.accepted / self.proposed


@dataclass(frozen=True)
class PosteriorSamples:
    """Retained draws after burn-in and thinning, labels in canonical form."""

    labels: np.ndarray           # (M, N)
    thetas: list                 # M arrays of shape (K_m, 3)
    log_posts: np.ndarray        # (M,)
    acceptance: AcceptanceStats

    @property
    def m(self) -> int:
        return self.labels.shape[0]

    @property
    def n(self) -> int:
        return self.labels.shape[1]


def _pick_log(logw: np.ndarray, rng: np.random.Generator) -> int:
    """Sample an index proportional to exp(logw); logw may contain -inf."""
    top = logw.max()
    if top == -np.inf:  # every option impossible: pick uniformly
        return int(rng.integers(logw.size))
    w = np.exp(logw - top)
    r = rng.random() * w.sum()
    acc = 0.0
    for idx in range(w.size - 1):
        acc += w[idx]
        if r < acc:
            return idx
    return w.size - 1


def _pick_mass(mass: np.ndarray, rng: np.random.Generator) -> int:
    """Sample an index proportional to a nonnegative mass vector."""
    r = rng.random() * mass.sum()
    acc = 0.0
    for idx in range(mass.size - 1):
        acc += mass[idx]
        if r < acc:
            return idx
    return mass.size - 1


def _update_label_ddp(
    i: int,
    state: ChainState,
    model: ModelData,
    weights: np.ndarray,
    alpha: float,
    aux_m: int,
    coeff_prior,
):
    part = state.partition
    rng = state.rng
    old, died = part.remove(i)
    state.bump_log_post(-state.node_ll[i])
    retained = None
    if died:
        retained = state.thetas.pop(old - 1)
        state.bump_log_post(-coeff_prior.logpdf(retained))
    k = len(state.thetas)
    z = part.z
    assigned = z > 0
    mass = np.empty(k + aux_m)
    mass[:k] = np.bincount(z[assigned] - 1, weights=weights[i, assigned], minlength=k)
    mass[k:] = alpha / aux_m
    if model.has_data:
        fresh = coeff_prior.sample_many(rng, aux_m - 1 if died else aux_m)
        aux = [retained] + list(fresh) if died else list(fresh)
        cand = np.asarray(state.thetas + aux) if k else np.asarray(aux)
        ll = model.node_loglik_many(i, cand)
        with np.errstate(divide="ignore"):
            logw = np.log(mass) + ll
        if not np.any(np.isfinite(logw)):
            # every candidate gives an impossible likelihood; move on the prior
            with np.errstate(divide="ignore"):
                logw = np.log(mass)
            state.ll_fallbacks += 1
        choice = _pick_log(logw, rng)
        ll_choice = ll[choice]
        theta_new = aux[choice - k] if choice >= k else None
    else:
        # no likelihood: the choice never depends on the auxiliary triples,
        # so draw a new cluster's triple only when a birth actually happens
        choice = _pick_mass(mass, rng)
        ll_choice = 0.0
        theta_new = None
        if choice >= k:
            if died and rng.random() < 1.0 / aux_m:
                theta_new = retained
            else:
                theta_new = coeff_prior.sample(rng)
    if choice < k:
        part.assign(i, choice + 1)
    else:
        part.assign(i, k + 1)
        state.thetas.append(theta_new)
        state.bump_log_post(coeff_prior.logpdf(theta_new))
    state.node_ll[i] = ll_choice
    state.bump_log_post(ll_choice)


def _update_label_fmm(
    i: int,
    state: ChainState,
    model: ModelData,
    gamma0: float,
    thetas_matrix: np.ndarray,
):
    part = state.partition
    part.remove(i)
    state.bump_log_post(-state.node_ll[i])
    mass = part.counts + gamma0
    if model.has_data:
        ll = model.node_loglik_many(i, thetas_matrix)
        logw = np.log(mass) + ll
        if not np.any(np.isfinite(logw)):
            logw = np.log(mass)
            state.ll_fallbacks += 1
        choice = _pick_log(logw, state.rng)
        ll_choice = ll[choice]
    else:
        choice = _pick_mass(mass, state.rng)
        ll_choice = 0.0
    part.assign(i, choice + 1)
    state.node_ll[i] = ll_choice
    state.bump_log_post(ll_choice)


def gibbs_update_labels(
    state: ChainState,
    model: ModelData,
    partition_prior,
    coeff_prior,
    weights: np.ndarray | None = None,
    aux_components: int = 3,
    order: np.ndarray | None = None,
) -> ChainState:
    """One full sweep of label updates, nodes in ascending order by default.

    Each node is removed, its conditional over existing clusters (and the
    new-cluster auxiliaries, for the distance-dependent prior) is weighted
    by the likelihood under each candidate triple, and a label is sampled.
    When every candidate has likelihood -inf the sweep falls back to the
    prior conditional alone so the chain keeps moving.
    """
    nodes = np.arange(model.n) if order is None else order
    if isinstance(partition_prior, DdpHyper):
        if weights is None:
            raise ValueError("label updates under the DDP need the weight matrix")
        for i in nodes:
            _update_label_ddp(
                int(i), state, model, weights, partition_prior.alpha, aux_components, coeff_prior
            )
    elif isinstance(partition_prior, FmmHyper):
        thetas_matrix = np.asarray(state.thetas)
        for i in nodes:
            _update_label_fmm(int(i), state, model, partition_prior.gamma0, thetas_matrix)
    else:
        raise TypeError(f"unsupported prior type {type(partition_prior).__name__}")
    return state


def mh_update_coefficients(
    state: ChainState,
    model: ModelData,
    coeff_prior,
    rw_step: float | None = None,
) -> ChainState:
    """One sweep of coefficient updates over the state's triples.

    Occupied clusters take a joint log-scale random-walk Metropolis step
    (or an exact Gibbs draw over the atoms of a discrete prior). Triples
    with no likelihood terms attached, meaning empty fixed-K components or
    every triple in a prior-only run, are redrawn from the prior, which is
    their exact conditional.
    """
    step = state.rw_step if rw_step is None else rw_step
    part = state.partition
    rng = state.rng
    if not model.has_data:
        # prior-only run: no likelihood terms attach to any triple, so the
        # prior is the exact conditional of every one; refresh in one batch
        fresh = coeff_prior.sample_many(rng, len(state.thetas))
        for k_idx, new in enumerate(fresh):
            state.bump_log_post(
                coeff_prior.logpdf(new) - coeff_prior.logpdf(state.thetas[k_idx])
            )
            state.thetas[k_idx] = new
        return state
    discrete = isinstance(coeff_prior, DiscreteCoefficientPrior)
    for k_idx in range(len(state.thetas)):
        theta = state.thetas[k_idx]
        if part.counts[k_idx] == 0:
            # empty fixed-K component: the prior is its exact conditional
            new = coeff_prior.sample(rng)
            state.bump_log_post(coeff_prior.logpdf(new) - coeff_prior.logpdf(theta))
            state.thetas[k_idx] = new
            continue
        if discrete:
            members = np.flatnonzero(part.z == k_idx + 1)
            _gibbs_discrete_theta(k_idx, members, state, model, coeff_prior)
            continue
        eps = rng.normal(0.0, step, size=3)
        prop = theta * np.exp(eps)
        lp_diff = coeff_prior.logpdf(prop) - coeff_prior.logpdf(theta)
        if model.has_data:
            members = np.flatnonzero(part.z == k_idx + 1)
            ll_prop = model.members_loglik(members, prop)
            ll_diff = float(ll_prop.sum()) - float(state.node_ll[members].sum())
        else:
            ll_diff = 0.0
        # log-scale proposal Jacobian: sum of log(prop_j / theta_j) = sum(eps)
        log_ratio = ll_diff + lp_diff + float(eps.sum())
        state.proposed += 1
        u = rng.random()
        accept = math.log(u) < log_ratio if u > 0.0 else log_ratio > -math.inf
        if accept:
            state.accepted += 1
            state.bump_log_post(ll_diff + lp_diff)
            state.thetas[k_idx] = prop
            if model.has_data:
                state.node_ll[members] = ll_prop
    return state


def _gibbs_discrete_theta(
    k_idx: int,
    members: np.ndarray,
    state: ChainState,
    model: ModelData,
    coeff_prior: DiscreteCoefficientPrior,
):
    atoms = coeff_prior.values
    per_atom = np.empty(atoms.shape[0])
    stored = None
    for a_idx, atom in enumerate(atoms):
        ll = model.members_loglik(members, atom)
        per_atom[a_idx] = ll.sum()
        if stored is None:
            stored = np.empty((atoms.shape[0], members.size))
        stored[a_idx] = ll
    choice = _pick_log(per_atom, state.rng)  # uniform atom weights cancel
    old_sum = float(state.node_ll[members].sum())
    state.thetas[k_idx] = atoms[choice].copy()
    state.node_ll[members] = stored[choice]
    state.bump_log_post(float(per_atom[choice]) - old_sum)


def _init_state(
    network: Network,
    model: ModelData,
    partition_prior,
    coeff_prior,
    config: McmcConfig,
    rng: np.random.Generator,
    weights: np.ndarray | None,
) -> ChainState:
    from .simulate import simulate_prior_partition

    n = network.n
    if isinstance(partition_prior, DdpHyper):
        part = simulate_prior_partition(network, partition_prior, rng, weights=weights)
        thetas = [coeff_prior.sample(rng) for _ in range(len(part.counts))]
    elif isinstance(partition_prior, FmmHyper):
        k, gamma0 = partition_prior.components, partition_prior.gamma0
        counts = np.zeros(k)
        labels = np.empty(n, dtype=np.int64)
        for i in range(n):
            probs = (counts + gamma0) / (i + k * gamma0)
            r = rng.random()
            lab = int(np.searchsorted(np.cumsum(probs), r, side="right")) + 1
            lab = min(lab, k)
            labels[i] = lab
            counts[lab - 1] += 1
        part = PartitionState(labels, fixed_k=k)
        thetas = [coeff_prior.sample(rng) for _ in range(k)]
    else:
        raise TypeError(f"unsupported prior type {type(partition_prior).__name__}")
    state = ChainState(partition=part, thetas=thetas, rng=rng, rw_step=config.rw_step)
    state.node_ll = np.array(
        [model.node_loglik(i, thetas[part.z[i] - 1]) for i in range(n)]
    )
    state.refresh_log_post(model, coeff_prior)
    return state


def _record_draw(state: ChainState):
    part = state.partition
    if part.fixed_k is None:
        return part.z.copy(), np.asarray(state.thetas).copy()
    canon, original = canonicalize_labels(part.z)
    thetas = np.asarray([state.thetas[lab - 1] for lab in original])
    return canon, thetas


def _run_single(
    counts: np.ndarray,
    network: Network,
    preds: Predictors,
    partition_prior,
    coeff_prior,
    config: McmcConfig,
    seed_seq: np.random.SeedSequence,
) -> PosteriorSamples:
    rng = np.random.default_rng(seed_seq)
    model = ModelData(counts, preds)
    weights = None
    if isinstance(partition_prior, DdpHyper):
        if network.n == 1:
            weights = np.zeros((1, 1))
        else:
            weights = ddp_weights(shortest_path_matrix(network), partition_prior.decay)
    state = _init_state(network, model, partition_prior, coeff_prior, config, rng, weights)

    n_draws = config.n_draws
    labels_out = np.empty((n_draws, model.n), dtype=np.int64)
    thetas_out = []
    log_posts = np.empty(n_draws)
    kept = 0
    post_proposed = 0
    post_accepted = 0
    log_step = np.log(state.rw_step)

    for it in range(1, config.iterations + 1):
        order = rng.permutation(model.n) if config.randomize_order else None
        gibbs_update_labels(
            state,
            model,
            partition_prior,
            coeff_prior,
            weights=weights,
            aux_components=config.aux_components,
            order=order,
        )
        before_p, before_a = state.proposed, state.accepted
        mh_update_coefficients(state, model, coeff_prior)
        in_burn = it <= config.burn_in
        if config.adapt and in_burn:
            swept = state.proposed - before_p
            if swept > 0:
                rate = (state.accepted - before_a) / swept
                log_step += (rate - ADAPT_TARGET) * it ** -0.6
                log_step = np.clip(log_step, np.log(_STEP_BOUNDS[0]), np.log(_STEP_BOUNDS[1]))
                state.rw_step = float(np.exp(log_step))
        if not in_burn:
            post_proposed += state.proposed - before_p
            post_accepted += state.accepted - before_a
        if it % _DRIFT_CHECK_EVERY == 0:
            cached, dirty = state.log_post, state._dirty
            fresh = state.refresh_log_post(model, coeff_prior)
            if not dirty and np.isfinite(cached) and np.isfinite(fresh):
                if abs(cached - fresh) > _DRIFT_TOL * max(1.0, abs(fresh)):
                    raise RuntimeError(
                        f"log-posterior cache drifted: {cached!r} vs {fresh!r}"
                    )
        if not in_burn and (it - config.burn_in) % config.thinning == 0:
            if state._dirty:
                state.refresh_log_post(model, coeff_prior)
            z, th = _record_draw(state)
            labels_out[kept] = z
            thetas_out.append(th)
            log_posts[kept] = state.log_post
            kept += 1

    if state.ll_fallbacks:
        logger.warning(
            "label conditional fell back to the prior %d times "
            "(all candidate likelihoods were -inf)",
            state.ll_fallbacks,
        )
    return PosteriorSamples(
        labels=labels_out[:kept],
        thetas=thetas_out,
        log_posts=log_posts[:kept],
        acceptance=AcceptanceStats(proposed=post_proposed, accepted=post_accepted),
    )


def run_chain(
    counts: np.ndarray,
    network: Network,
    preds: Predictors,
    partition_prior,
    config: McmcConfig,
    coeff_prior=None,
) -> PosteriorSamples:
    """Run a single chain; fully determined by ``config.seed``.

    The chain's random stream is the first spawn of the master seed, so a
    one-chain :func:`run_multichain` gives an identical result.
    """
    if coeff_prior is None:
        coeff_prior = CoefficientPrior(1.0, 1.0)
    seed_seq = np.random.SeedSequence(config.seed).spawn(1)[0]
    return _run_single(counts, network, preds, partition_prior, coeff_prior, config, seed_seq)


def run_multichain(
    counts: np.ndarray,
    network: Network,
    preds: Predictors,
    partition_prior,
    config: McmcConfig,
    coeff_prior=None,
) -> list[PosteriorSamples]:
    """Run ``config.chains`` chains on independent streams spawned from the seed.

    Chains are independent given their streams, so results do not depend
    on scheduling; they are run sequentially here.
    """
    if coeff_prior is None:
        coeff_prior = CoefficientPrior(1.0, 1.0)
    seqs = np.random.SeedSequence(config.seed).spawn(config.chains)
    return [
        _run_single(counts, network, preds, partition_prior, coeff_prior, config, s)
        for s in seqs
    ]
