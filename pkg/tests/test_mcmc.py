import itertools
import logging
import math

import numpy as np
import pytest

from pnarm import (
    CoefficientPrior,
    DdpHyper,
    DiscreteCoefficientPrior,
    FmmHyper,
    McmcConfig,
    ModelData,
    build_predictors,
    ddp_conditional,
    ddp_weights,
    gibbs_update_labels,
    init_chain_state,
    mh_update_coefficients,
    recompute_log_post,
    run_chain,
    run_multichain,
    shortest_path_matrix,
    PartitionState,
    SimSpec,
    simulate,
)
from pnarm.simulate import poisson_draw

from helpers import (
    batch_means_se,
    canon_tuple,
    crp_log_prob,
    fmm_label_log_prob,
    path_network,
    poisson_log_pmf,
    set_partitions,
)


def prior_only_counts(n):
    return np.zeros((n, 1), dtype=np.int64)


def make_model(counts, net):
    return ModelData(counts, build_predictors(counts, net))


class TestSchedule:
    def test_draw_count_arithmetic(self, path5):
        y = prior_only_counts(5)
        cfg = McmcConfig(iterations=100, burn_in=50, thinning=5, seed=0)
        s = run_chain(y, path5, build_predictors(y, path5), DdpHyper(1.0), cfg)
        assert s.m == 10

    def test_bad_configs_rejected(self):
        with pytest.raises(ValueError):
            McmcConfig(iterations=10, burn_in=10)
        with pytest.raises(ValueError):
            McmcConfig(thinning=0)
        with pytest.raises(ValueError):
            McmcConfig(chains=0)

    def test_identical_seeds_identical_samples(self, path5):
        y = prior_only_counts(5)
        preds = build_predictors(y, path5)
        cfg = McmcConfig(iterations=300, burn_in=100, thinning=2, seed=99)
        a = run_chain(y, path5, preds, DdpHyper(1.0, 0.5), cfg)
        b = run_chain(y, path5, preds, DdpHyper(1.0, 0.5), cfg)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.log_posts, b.log_posts)
        assert all(np.array_equal(x, y_) for x, y_ in zip(a.thetas, b.thetas))

    def test_single_chain_multichain_equivalence(self, path5):
        y = prior_only_counts(5)
        preds = build_predictors(y, path5)
        cfg = McmcConfig(iterations=200, burn_in=50, thinning=1, seed=7, chains=1)
        single = run_chain(y, path5, preds, FmmHyper(3), cfg)
        multi = run_multichain(y, path5, preds, FmmHyper(3), cfg)
        assert len(multi) == 1
        assert np.array_equal(single.labels, multi[0].labels)

    def test_chains_have_distinct_streams(self, path5):
        y = prior_only_counts(5)
        preds = build_predictors(y, path5)
        cfg = McmcConfig(iterations=200, burn_in=50, thinning=1, seed=7, chains=3)
        chains = run_multichain(y, path5, preds, DdpHyper(1.0), cfg)
        assert not np.array_equal(chains[0].labels, chains[1].labels)
        assert not np.array_equal(chains[1].labels, chains[2].labels)
        rerun = run_multichain(y, path5, preds, DdpHyper(1.0), cfg)
        for a, b in zip(chains, rerun):
            assert np.array_equal(a.labels, b.labels)

    def test_draw_labels_always_canonical(self, path5):
        # canonical form: labels are 1..k with every value in range used
        y = prior_only_counts(5)
        preds = build_predictors(y, path5)
        cfg = McmcConfig(iterations=400, burn_in=100, thinning=1, seed=3)
        for prior in (DdpHyper(2.0, 1.0), FmmHyper(3)):
            s = run_chain(y, path5, preds, prior, cfg)
            for z in s.labels:
                assert set(z) == set(range(1, int(z.max()) + 1))

    def test_single_node_always_cluster_one(self):
        net = path_network(1)
        y = np.array([[2, 1, 3]])
        preds = build_predictors(y, net)
        cfg = McmcConfig(iterations=200, burn_in=100, thinning=1, seed=0)
        s = run_chain(y, net, preds, DdpHyper(1.0), cfg)
        assert np.all(s.labels == 1)


class TestLabelConditional:
    def test_prior_only_update_matches_conditional(self, path3, rng):
        """With no data the single-node update must sample the prior conditional."""
        w = ddp_weights(shortest_path_matrix(path3), math.log(2.0))
        alpha = 1.5
        model = make_model(prior_only_counts(3), path3)
        prior = DdpHyper(alpha=alpha, decay=math.log(2.0))
        coeff = CoefficientPrior(1.0, 1.0)

        # others hold labels (1, 2); updating node 2 can join either
        # singleton cluster or open a third
        probe = PartitionState([1, 2, 0])
        expected = ddp_conditional(2, probe, w, alpha)

        m = 40_000
        hits = np.zeros(3)
        for _ in range(m):
            state = init_chain_state([1, 2, 2], [np.ones(3), np.ones(3)], model, coeff, rng)
            gibbs_update_labels(state, model, prior, coeff, weights=w,
                                order=np.array([2]))
            hits[state.partition.z[2] - 1] += 1
        freqs = hits / m
        for got, want in zip(freqs, expected):
            se = math.sqrt(want * (1 - want) / m)
            assert abs(got - want) < 3.5 * se

    def test_frozen_theta_fmm_matches_enumeration(self, rng):
        """Label sweeps with fixed triples must hit the exact conditional law.

        The oracle enumerates all 2^4 label vectors with the collapsed
        label prior times an independently coded Poisson likelihood.
        """
        net = path_network(4)
        atoms = np.array([[1.0, 0.2, 0.3], [4.0, 0.1, 0.1]])
        spec = SimSpec(network=net, labels=np.array([1, 1, 2, 2]), thetas=atoms,
                       t_len=5, seed=31)
        y = simulate(spec)

        adj = net.adjacency.astype(float)
        deg = adj.sum(axis=1)

        def node_lik(i, theta):
            out = 0.0
            for t in range(1, y.shape[1]):
                x = adj[i] @ y[:, t - 1] / deg[i]
                rate = theta[0] + theta[1] * x + theta[2] * y[i, t - 1]
                out += poisson_log_pmf(y[i, t], rate)
            return out

        exact = {}
        for labels in itertools.product((1, 2), repeat=4):
            lp = fmm_label_log_prob(labels, 2, 1.0)
            for i, lab in enumerate(labels):
                lp += node_lik(i, atoms[lab - 1])
            exact[labels] = lp
        top = max(exact.values())
        total = sum(math.exp(v - top) for v in exact.values())
        exact = {k: math.exp(v - top) / total for k, v in exact.items()}

        model = make_model(y, net)
        coeff = CoefficientPrior(1.0, 1.0)
        prior = FmmHyper(components=2, gamma0=1.0)
        state = init_chain_state([1, 2, 1, 2], list(atoms), model, coeff, rng, fixed_k=2)
        sweeps = 100_000
        trace = np.empty((sweeps, 4), dtype=np.int8)
        for s in range(sweeps):
            gibbs_update_labels(state, model, prior, coeff)
            trace[s] = state.partition.z
        for labels, p_exact in exact.items():
            series = np.all(trace == np.asarray(labels, dtype=np.int8), axis=1).astype(float)
            p_hat = series.mean()
            # binomial floor keeps the bound meaningful for never-visited states
            se = max(batch_means_se(series, 100), math.sqrt(p_exact * (1 - p_exact) / sweeps))
            assert abs(p_hat - p_exact) < 3 * se + 1e-12, (labels, p_hat, p_exact)

    def test_fallback_when_every_candidate_impossible(self, path3, caplog):
        y = np.array([[1, 2], [0, 1], [3, 1]])
        preds = build_predictors(y, path3)
        cfg = McmcConfig(iterations=50, burn_in=10, thinning=1, seed=0)
        dead = DiscreteCoefficientPrior([[0.0, 0.0, 0.0]])
        with caplog.at_level(logging.WARNING, logger="pnarm.mcmc"):
            s = run_chain(y, path3, preds, FmmHyper(2), cfg, coeff_prior=dead)
        assert s.m == 40
        assert any("fell back" in rec.message for rec in caplog.records)


class TestFrozenThetaExactPosterior:
    def test_ddp_with_discrete_prior_matches_enumeration(self, rng):
        """Full chain (labels plus discrete coefficient Gibbs) against the
        exact posterior over partitions, coefficients marginalized."""
        net = path_network(3)
        atoms = np.array([[0.8, 0.1, 0.4], [3.5, 0.05, 0.15]])
        spec = SimSpec(network=net, labels=np.array([1, 1, 2]), thetas=atoms,
                       t_len=4, seed=13)
        y = simulate(spec)
        alpha = 1.0

        adj = net.adjacency.astype(float)
        deg = adj.sum(axis=1)

        def node_lik(i, theta):
            out = 0.0
            for t in range(1, y.shape[1]):
                x = adj[i] @ y[:, t - 1] / deg[i]
                rate = theta[0] + theta[1] * x + theta[2] * y[i, t - 1]
                out += poisson_log_pmf(y[i, t], rate)
            return out

        # exact posterior over the 5 partitions: CRP prior times the mean
        # over atoms of each cluster's likelihood (atoms are equally likely)
        exact = {}
        for part in set_partitions(3):
            lp = crp_log_prob(part, alpha)
            for lab in set(part):
                members = [i for i, p in enumerate(part) if p == lab]
                per_atom = [sum(node_lik(i, a) for i in members) for a in atoms]
                top = max(per_atom)
                lp += top + math.log(sum(math.exp(v - top) for v in per_atom) / len(atoms))
            exact[part] = lp
        top = max(exact.values())
        total = sum(math.exp(v - top) for v in exact.values())
        exact = {k: math.exp(v - top) / total for k, v in exact.items()}

        prior = DiscreteCoefficientPrior(atoms)
        cfg = McmcConfig(iterations=60_000, burn_in=5_000, thinning=1, seed=5,
                         aux_components=3, adapt=False)
        s = run_chain(y, net, build_predictors(y, net), DdpHyper(alpha), cfg,
                      coeff_prior=prior)
        drawn = [canon_tuple(z) for z in s.labels]
        for part, p_exact in exact.items():
            series = np.array([d == part for d in drawn], dtype=float)
            p_hat = series.mean()
            se = max(batch_means_se(series, 100), math.sqrt(p_exact * (1 - p_exact) / len(drawn)))
            assert abs(p_hat - p_exact) < 3 * se + 1e-12, (part, p_hat, p_exact)


class TestMetropolisUpdate:
    def test_vanishing_step_accepts_everything(self, path5):
        spec = SimSpec(network=path5, labels=np.ones(5, int),
                       thetas=np.array([[1.0, 0.3, 0.4]]), t_len=30, seed=2)
        y = simulate(spec)
        preds = build_predictors(y, path5)
        cfg = McmcConfig(iterations=400, burn_in=100, thinning=1, seed=1,
                         rw_step=1e-9, adapt=False)
        s = run_chain(y, path5, preds, FmmHyper(1), cfg)
        assert s.acceptance.rate > 0.999

    def test_acceptance_rate_strictly_interior(self, path5):
        spec = SimSpec(network=path5, labels=np.ones(5, int),
                       thetas=np.array([[1.0, 0.3, 0.4]]), t_len=40, seed=3)
        y = simulate(spec)
        preds = build_predictors(y, path5)
        cfg = McmcConfig(iterations=2_000, burn_in=500, thinning=1, seed=1, adapt=True)
        s = run_chain(y, path5, preds, DdpHyper(1.0), cfg)
        assert 0.0 < s.acceptance.rate < 1.0

    def test_adaptation_targets_quarter(self, path5):
        spec = SimSpec(network=path5, labels=np.ones(5, int),
                       thetas=np.array([[1.5, 0.2, 0.5]]), t_len=80, seed=4)
        y = simulate(spec)
        preds = build_predictors(y, path5)
        cfg = McmcConfig(iterations=6_000, burn_in=3_000, thinning=1, seed=2,
                         rw_step=3.0, adapt=True)
        s = run_chain(y, path5, preds, FmmHyper(1), cfg)
        assert 0.12 < s.acceptance.rate < 0.40

    def test_log_post_cache_consistent_after_sweeps(self, path5, rng):
        spec = SimSpec(network=path5, labels=np.array([1, 1, 1, 2, 2]),
                       thetas=np.array([[0.5, 0.1, 0.6], [3.0, 0.05, 0.2]]),
                       t_len=30, seed=5)
        y = simulate(spec)
        model = make_model(y, path5)
        coeff = CoefficientPrior(1.0, 1.0)
        w = ddp_weights(shortest_path_matrix(path5), 1.0)
        prior = DdpHyper(1.0, 1.0)
        state = init_chain_state([1, 1, 2, 2, 1], [rng.gamma(1, 1, 3), rng.gamma(1, 1, 3)],
                                 model, coeff, rng)
        for _ in range(50):
            gibbs_update_labels(state, model, prior, coeff, weights=w)
            mh_update_coefficients(state, model, coeff)
        fresh = recompute_log_post(state, model, coeff)
        assert state.log_post == pytest.approx(fresh, abs=1e-8 * max(1.0, abs(fresh)))


class TestGewekeStationarity:
    """Alternating data resimulation with one transition must preserve the
    prior marginals when the kernel is exact, here checked for the uniform
    co-clustering prior and the finite mixture."""

    N = 5
    T = 4
    ROUNDS = 10_000
    Y1 = np.array([1, 2, 0, 3, 1])

    def _resimulate(self, net, labels, thetas, rng):
        adj = net.adjacency.astype(float)
        deg = np.maximum(adj.sum(axis=1), 1.0)
        y = np.zeros((self.N, self.T), dtype=np.int64)
        y[:, 0] = self.Y1
        th = np.asarray(thetas)
        for t in range(1, self.T):
            x = adj @ y[:, t - 1] / deg
            for i in range(self.N):
                theta = th[labels[i] - 1]
                rate = theta[0] + theta[1] * x[i] + theta[2] * y[i, t - 1]
                y[i, t] = poisson_draw(float(rate), rng)
        return y

    def _run(self, net, prior, init_labels, fixed_k, exact_mean_k):
        rng = np.random.default_rng(1234)
        coeff = CoefficientPrior(1.0, 1.0)
        w = ddp_weights(shortest_path_matrix(net), getattr(prior, "decay", 0.0))
        n_th = fixed_k if fixed_k else int(np.max(init_labels))
        labels = np.asarray(init_labels)
        thetas = [coeff.sample(rng) for _ in range(n_th)]
        k_stats = np.empty(self.ROUNDS)
        theta_stats = np.empty(self.ROUNDS)
        for r in range(self.ROUNDS):
            y = self._resimulate(net, labels, thetas, rng)
            model = ModelData(y, build_predictors(y, net))
            state = init_chain_state(labels, thetas, model, coeff, rng, fixed_k=fixed_k)
            gibbs_update_labels(state, model, prior, coeff,
                                weights=None if fixed_k else w)
            mh_update_coefficients(state, model, coeff)
            labels = state.partition.z.copy()
            thetas = [th.copy() for th in state.thetas]
            k_stats[r] = state.partition.k
            theta_stats[r] = thetas[labels[0] - 1][0]
        se_k = batch_means_se(k_stats, 50)
        se_t = batch_means_se(theta_stats, 50)
        assert abs(k_stats.mean() - exact_mean_k) < 3 * se_k, (k_stats.mean(), exact_mean_k)
        assert abs(theta_stats.mean() - 1.0) < 3 * se_t, theta_stats.mean()

    def test_crp_prior_invariant(self):
        net = path_network(self.N)
        exact_mean_k = sum(1.0 / (1.0 + i) for i in range(self.N))
        self._run(net, DdpHyper(alpha=1.0, decay=0.0), [1, 1, 2, 1, 2], None, exact_mean_k)

    def test_fmm_prior_invariant(self):
        net = path_network(self.N)
        total = 0.0
        for labels in itertools.product((1, 2), repeat=self.N):
            total += len(set(labels)) * math.exp(fmm_label_log_prob(labels, 2, 1.0))
        self._run(net, FmmHyper(components=2, gamma0=1.0), [1, 2, 1, 2, 1], 2, total)
