"""Polychromatic red-sideband pulse synthesis for a trapped ion.

Closed-form effective Hamiltonians of a periodic multi-tone drive, a
constrained optimizer over tone amplitudes, and exact propagation to verify
the resulting pulses against a single-tone reference.
"""
from .drive import PERIOD, PulseSpec, UnsupportedRegimeError, h_funcs, hamiltonian, monochromatic_reference
from .effective import (
    assemble,
    alpha_first,
    alpha_second,
    alpha_zeroth,
    coefficients,
    constraint_residuals,
    full_constraint_residuals,
)
from .fock import BasisIndex, ConfigurationError, SpaceConfig, build_operators, flat_index
from .functionals import (
    cycle_infidelity,
    g_integrals,
    gate_infidelity_asymptotic,
    gate_infidelity_truncated,
    state_infidelity,
    timing_sensitivity,
)
from .magnus import magnus_numeric, scalar_alpha_numeric
from .optimizer import OptimizationProblem, OptimizationResult, improvement_sweep, solve, solve_at_delta
from .propagate import IntegrationError, propagate_effective, propagate_exact, simulate, target_propagator

__version__ = "0.1.0"

__all__ = [
    "PERIOD", "PulseSpec", "UnsupportedRegimeError", "h_funcs", "hamiltonian", "monochromatic_reference",
    "assemble", "alpha_first", "alpha_second", "alpha_zeroth", "coefficients", "constraint_residuals",
    "full_constraint_residuals",
    "BasisIndex", "ConfigurationError", "SpaceConfig", "build_operators", "flat_index",
    "cycle_infidelity", "g_integrals", "gate_infidelity_asymptotic", "gate_infidelity_truncated",
    "state_infidelity", "timing_sensitivity",
    "magnus_numeric", "scalar_alpha_numeric",
    "OptimizationProblem", "OptimizationResult", "improvement_sweep", "solve", "solve_at_delta",
    "IntegrationError", "propagate_effective", "propagate_exact", "simulate", "target_propagator",
]
