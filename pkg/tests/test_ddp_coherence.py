"""Exact finite-state analysis of the distance-dependent label conditionals.

With uniform weights the conditionals are those of the Chinese restaurant
process, so the systematic-scan Gibbs kernel and in-order sequential
allocation share one law. With a positive decay on a graph whose
distances vary, the conditionals are not coherent with any single joint:
the scan kernel's stationary law measurably differs from the sequential
allocation law. These tests pin both facts and validate the sampler
against the kernel's true stationary distribution, which is the correct
reference for what the chain targets.
"""

import math

import numpy as np
import pytest

from pnarm import DdpHyper, McmcConfig, build_predictors, ddp_weights, run_chain, shortest_path_matrix

from helpers import (
    batch_means_se,
    cocluster_freq,
    cocluster_from_partition_probs,
    crp_log_prob,
    pair_indicator_series,
    path_network,
    scan_gibbs_stationary,
    seq_alloc_log_prob,
    set_partitions,
)


def test_uniform_weights_scan_stationary_equals_crp():
    for n in (3, 4, 5):
        net = path_network(n)
        w = ddp_weights(shortest_path_matrix(net), 0.0)
        parts, stat = scan_gibbs_stationary(w, 1.0)
        for p, pr in zip(parts, stat):
            assert pr == pytest.approx(math.exp(crp_log_prob(p, 1.0)), abs=1e-12)
            assert pr == pytest.approx(math.exp(seq_alloc_log_prob(p, w, 1.0)), abs=1e-12)


def test_positive_decay_scan_stationary_differs_from_sequential():
    """The conditionals are incoherent once distances matter: the scan
    kernel's stationary co-clustering is not the sequential-allocation
    co-clustering, by far more than numerical error."""
    net = path_network(5)
    w = ddp_weights(shortest_path_matrix(net), 1.0)
    parts, stat = scan_gibbs_stationary(w, 1.0)
    seq = np.array([math.exp(seq_alloc_log_prob(p, w, 1.0)) for p in parts])
    assert seq.sum() == pytest.approx(1.0, abs=1e-12)
    gap = np.abs(
        cocluster_from_partition_probs(parts, stat)
        - cocluster_from_partition_probs(parts, seq)
    ).max()
    assert gap > 0.01


def test_prior_only_chain_matches_exact_scan_stationary():
    """At decay 1 the sampler must still realize its own kernel's
    stationary law, computed here by exact linear algebra."""
    net = path_network(5)
    w = ddp_weights(shortest_path_matrix(net), 1.0)
    parts, stat = scan_gibbs_stationary(w, 1.0)
    exact_cc = cocluster_from_partition_probs(parts, stat)

    y = np.zeros((5, 1), dtype=np.int64)
    cfg = McmcConfig(iterations=21_000, burn_in=1_000, thinning=1, seed=17)
    s = run_chain(y, net, build_predictors(y, net), DdpHyper(alpha=1.0, decay=1.0), cfg)
    chain_cc = cocluster_freq(s.labels)
    for i in range(5):
        for j in range(i + 1, 5):
            series = pair_indicator_series(s.labels, i, j)
            se = max(batch_means_se(series, 100), 1e-4)
            assert abs(chain_cc[i, j] - exact_cc[i, j]) < 3 * se, (i, j)
