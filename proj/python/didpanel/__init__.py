"""Staggered-order difference-in-differences on county panels."""

from ._core import (
    ConfigError,
    DataError,
    EstimationError,
    counterfactual,
    counterfactual_weekly,
    did_2x2_oracle,
    estimate,
    event_study,
    fit_wls,
    log_growth_from_sums,
    percent_effect,
    recovery_experiment,
    run_cli,
    simulate,
    true_effect,
)

__all__ = [
    "ConfigError",
    "DataError",
    "EstimationError",
    "counterfactual",
    "counterfactual_weekly",
    "did_2x2_oracle",
    "estimate",
    "event_study",
    "fit_wls",
    "log_growth_from_sums",
    "percent_effect",
    "recovery_experiment",
    "run_cli",
    "simulate",
    "true_effect",
]
