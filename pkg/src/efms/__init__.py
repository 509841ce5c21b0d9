"""Exponentially-fitted symmetric multistep methods for y'' = f(x, y)."""

from .ef_fitting import build_moment_system, classical_limit, exactness_check, solve_ef_coefficients
from .errors import *  # noqa: F401,F403
from .integrator import IVProblem, Trajectory, amplitude_drift, bootstrap_starts, integrate, step
from .method_core import (
    CoefficientSet,
    MethodSpec,
    OrderReport,
    ValidationReport,
    apply_functional,
    load_method_spec,
    order_and_error_constant,
    to_centered,
    to_standard,
    validate,
)
from .phase_analysis import (
    characteristic_model,
    characteristic_roots,
    fit_phaselag,
    is_periodic_point,
    periodicity_interval,
    phase_lag,
    plte_constant_closed_form,
    stability_region_scan,
    theorem1_residual,
    theorem2_check,
)
from .problems import harmonic, inhomogeneous_oscillator, kepler_circular

__version__ = "0.1.0"
