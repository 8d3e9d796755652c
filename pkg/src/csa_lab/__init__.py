"""Simulation and closed-form theory for the (1,lambda)-CSA-ES on linear functions."""

from csa_lab.errors import (
    ConfigurationError,
    ContractError,
    NumericalDomainError,
    QuadratureAccuracyError,
)
from csa_lab.order_stats import (
    OrderStatMoments,
    OrderStatSpec,
    expected_chi_norm,
    moments_quadrature,
    sample_order_stat,
)
from csa_lab.es_core import (
    AlgorithmParams,
    EsState,
    ObjectiveSpec,
    SelectedStep,
    init_state,
    run_rng,
    select_step_full,
    select_step_shortcut,
    step,
    update_log_sigma,
    update_path,
)
from csa_lab.theory import ScalingSpec, TheoryPrediction, predict

__version__ = "0.1.0"

__all__ = [
    "AlgorithmParams",
    "ConfigurationError",
    "ContractError",
    "EsState",
    "NumericalDomainError",
    "ObjectiveSpec",
    "OrderStatMoments",
    "OrderStatSpec",
    "QuadratureAccuracyError",
    "ScalingSpec",
    "SelectedStep",
    "TheoryPrediction",
    "expected_chi_norm",
    "init_state",
    "moments_quadrature",
    "predict",
    "run_rng",
    "sample_order_stat",
    "select_step_full",
    "select_step_shortcut",
    "step",
    "update_log_sigma",
    "update_path",
]
