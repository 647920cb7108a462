"""Two-layer network posteriors over l1-ball weights."""

from ._core import (
    Activation,
    BoundInputs,
    ConfigError,
    Dataset,
    EnumerationLimitError,
    NetworkConfig,
    ProductGrid,
    bayes_factor_telescope,
    bound,
    check_logconcavity_conditions,
    cli,
    count_grid,
    enumerate_grid,
    eval_network,
    exact_discrete_posterior,
    log_posterior_unnorm,
    loss,
    optimal_hyperparams,
    posterior_mean,
    posterior_score,
    predictive_density,
)

__version__ = "0.1.0"
