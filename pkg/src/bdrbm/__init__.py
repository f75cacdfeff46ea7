"""Basis-dependent RBM tomography.

A feed-forward network maps local measurement-basis coordinates to the
parameters of a restricted Boltzmann machine that models the outcome
distribution in that basis.
"""
from .evaluation import classical_fidelity, filter_report, fidelity_report
from .pipeline import BdrbmModel, TomographyConfig, predict_distribution, run_tomography
from .quantum import LocalBasis, PureState, TfimParams, outcome_distribution, tfim_ground_state

__version__ = "0.1.0"

__all__ = [
    "BdrbmModel", "LocalBasis", "PureState", "TfimParams", "TomographyConfig",
    "classical_fidelity", "fidelity_report", "filter_report", "outcome_distribution",
    "predict_distribution", "run_tomography", "tfim_ground_state",
]
