"""Bayesian Poisson network autoregression mixtures for count series on graphs."""

from .graph import Network, ddp_weights, shortest_path_matrix
from .mcmc import (
    AcceptanceStats,
    ChainState,
    McmcConfig,
    ModelData,
    PosteriorSamples,
    gibbs_update_labels,
    init_chain_state,
    mh_update_coefficients,
    recompute_log_post,
    run_chain,
    run_multichain,
)
from .model import (
    POPULATION_ADJUSTED,
    RAW,
    Predictors,
    build_predictors,
    conditional_mean,
    horizon_inputs,
    network_lag_series,
    node_log_likelihood,
    validate_counts,
)
from .posterior import (
    PredictiveDistribution,
    cell_predictive_rates,
    cocluster_matrix,
    least_squares_partition,
    mixture_cdf,
    mixture_pmf,
    partition_loss,
    pooled_draws,
    posterior_predictive,
)
from .priors import (
    CoefficientPrior,
    DdpHyper,
    DiscreteCoefficientPrior,
    FmmHyper,
    PartitionState,
    canonicalize_labels,
    ddp_conditional,
    fmm_conditional,
)
from .evaluation import (
    ScoreReport,
    log_score,
    mase,
    pit_histogram,
    randomized_pit,
    randomized_pit_cells,
    stacking_objective,
    stacking_weights,
)
from .simulate import SimSpec, poisson_draw, simulate, simulate_prior_partition

__version__ = "0.1.0"
