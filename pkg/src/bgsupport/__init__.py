"""Support recovery for Bernoulli-Gaussian sparse signals by constrained MAP search."""

from .bounds import (
    BoundParams,
    chi_sq_tail_bound,
    constant_C,
    event_E_prob_lower,
    fig1_sweep,
    regression_error_bound,
    theorem1,
    theorem2,
)
from .errors import ConfigError, DomainError, EnumerationLimitError, NumericalError
from .harness import ExperimentConfig, run_experiment, run_trial
from .map_estimator import exhaustive_map, gamma_cost, greedy_map, regress_on_support
from .metrics import check_propositions, missed_energy, partition_supports, project_noise
from .signal_model import ModelParams, estimate_rip, generate_instance

__version__ = "0.1.0"
