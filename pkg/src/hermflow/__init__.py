"""Spectral laboratory for the parabolic complex Monge-Ampère flow on flat
complex tori with Hermitian (possibly non-Kähler) background metrics."""

from .grid import TorusGrid, TensorField, make_grid
from .geometry import HermitianMetricField, flat_metric, perturbed_metric, conformal_metric, kahler_metric
from .forcing import ForcingSpec, zero_forcing, linear_forcing, expression_forcing
from .flow import DtPolicy, Trajectory, run_flow, flow_rhs
from .elliptic import EllipticProblem, SolveReport, solve_elliptic
from .smoothing import KinkSpec, SmoothingExperiment, run_pipeline

__all__ = [
    "TorusGrid", "TensorField", "make_grid",
    "HermitianMetricField", "flat_metric", "perturbed_metric", "conformal_metric", "kahler_metric",
    "ForcingSpec", "zero_forcing", "linear_forcing", "expression_forcing",
    "DtPolicy", "Trajectory", "run_flow", "flow_rhs",
    "EllipticProblem", "SolveReport", "solve_elliptic",
    "KinkSpec", "SmoothingExperiment", "run_pipeline",
]
