"""Accelerated decentralized proximal method with a gossip consensus subroutine."""

from .core import StackedVector, consensus_error, project_consensus
from .network import MixingSchedule, certify_chi, consensus, metropolis_weights
from .objectives import (
    LogisticObjective,
    ObjectiveEnsemble,
    QuadraticObjective,
    ensemble_constants,
    generate_quadratic_ensemble,
    load_libsvm,
    logistic_ensemble,
)
from .prox import CompositeTerm, prox_point, prox_stacked
from .solver import RunReport, centralized_reference, next_alpha, run, select_T, step

__version__ = "0.1.0"

__all__ = [
    "CompositeTerm",
    "LogisticObjective",
    "MixingSchedule",
    "ObjectiveEnsemble",
    "QuadraticObjective",
    "RunReport",
    "StackedVector",
    "centralized_reference",
    "certify_chi",
    "consensus",
    "consensus_error",
    "ensemble_constants",
    "generate_quadratic_ensemble",
    "load_libsvm",
    "logistic_ensemble",
    "metropolis_weights",
    "next_alpha",
    "project_consensus",
    "prox_point",
    "prox_stacked",
    "run",
    "select_T",
    "step",
]
