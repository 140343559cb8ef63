"""Boundary-geometry error analysis for DG spectral element advection solvers."""
from .basis import QuadratureRule, TensorGrid, derivative_matrix, gauss_legendre, interpolate, weighted_norm_sq
from .geometry import (BoundaryCurve, DomainSpec, InvalidDomainError, MappedDomain, MetricField, circle_domain,
                       delta_gamma, metric_terms, mixed_domain, family_domain, transfinite_map)
from .solver import PlaneWave, SimulationConfig, analytic_1d, analytic_2d, dg_rhs, rk_step, simulate

__all__ = [
    "QuadratureRule", "TensorGrid", "derivative_matrix", "gauss_legendre", "interpolate", "weighted_norm_sq",
    "BoundaryCurve", "DomainSpec", "InvalidDomainError", "MappedDomain", "MetricField", "circle_domain",
    "delta_gamma", "metric_terms", "mixed_domain", "family_domain", "transfinite_map",
    "PlaneWave", "SimulationConfig", "analytic_1d", "analytic_2d", "dg_rhs", "rk_step", "simulate",
]
__version__ = "0.1.0"
