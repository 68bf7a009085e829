"""Finite-difference solver and scattering diagnostics on the exterior domain."""
from .grid import ExteriorGrid, SurfaceQuadrature, build_grid
from .profiles import (GaussianData, ScaleCore, collar_cutoff, compare_to_free, default_horizon,
                       difference_energy, make_profile_data, nonconcentration_scan, orthogonality,
                       translation_grid)
from .solver import (APRIORI_FLUX_C, CSV_COLUMNS, DiagnosticsSeries, WaveField, apriori_flux_bound_check, apriori_ratio,
                     boundary_flux, energy, evolve, flux_integral, flux_time_average, laplacian,
                     local_energy_average, lp_norm, morawetz_residual, morawetz_terms, normal_derivative,
                     step, synchronized_velocity)

__all__ = [
    "APRIORI_FLUX_C", "CSV_COLUMNS", "DiagnosticsSeries", "ExteriorGrid", "GaussianData", "ScaleCore", "SurfaceQuadrature",
    "WaveField", "apriori_flux_bound_check", "apriori_ratio", "boundary_flux", "build_grid",
    "collar_cutoff", "compare_to_free", "default_horizon", "difference_energy", "energy", "evolve",
    "flux_integral", "flux_time_average", "laplacian", "local_energy_average", "lp_norm",
    "make_profile_data", "morawetz_residual", "morawetz_terms", "nonconcentration_scan",
    "normal_derivative", "orthogonality", "step", "synchronized_velocity", "translation_grid",
]
