"""Separation sensitivity of two entangled point sources under HG-mode demultiplexing."""
from .detection import CountModel, count_covariance, count_model, inv_covariance, mode_counts, total_count, total_variance
from .errors import (
    ConvergenceError,
    CutoffError,
    DegenerateEstimatorError,
    DomainError,
    ParameterError,
    SpadeSenseError,
)
from .estimator import SeparationEstimator, linearize
from .montecarlo import EstimationRun, Sampler, local_estimate, run_trials, sample_mean
from .optics import ModeBasis, OpticsParams, Quadrature, a_coeff, a_coeff_numeric, choose_cutoff, g_coeff, overlap_p
from .sensitivity import SensitivityReport, baseline, rim_closed_form, rim_numeric, total, tpd
from .source import CoherencyMatrix, IncidentMoment, SourceParams, coherency, eta, mode_transform, validate

__version__ = "0.1.0"

__all__ = [
    "CoherencyMatrix", "ConvergenceError", "CountModel", "CutoffError", "DegenerateEstimatorError", "DomainError",
    "EstimationRun", "IncidentMoment", "ModeBasis", "OpticsParams", "ParameterError", "Quadrature", "Sampler",
    "SensitivityReport", "SeparationEstimator", "SourceParams", "SpadeSenseError", "a_coeff", "a_coeff_numeric",
    "baseline", "choose_cutoff", "coherency", "count_covariance", "count_model", "eta", "g_coeff", "inv_covariance",
    "linearize", "local_estimate", "mode_counts", "mode_transform", "overlap_p", "rim_closed_form", "rim_numeric",
    "run_trials", "sample_mean", "total", "total_count", "total_variance", "tpd", "validate",
]
