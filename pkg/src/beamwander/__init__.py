"""Laser beam wander over turbulent paths: closed-form weak-turbulence
predictions and a split-step phase-screen Monte Carlo propagator.
"""

from .analytics import (
    GeometryParams,
    WanderPrediction,
    beam_radius_squared,
    classic_wander,
    cross_correlation_wander,
    i1_integral,
    strong_turbulence_condition,
    turbulence_spread,
    wander_variance_weak,
)
from .exceptions import (
    BeamwanderError,
    ConfigError,
    DegenerateInputError,
    InputMismatchError,
    NumericalAccuracyError,
    ParameterDomainError,
    ResolutionError,
    ResolutionWarning,
    StepSizeError,
)
from .experiment import (
    ExperimentConfig,
    SweepRow,
    WanderStats,
    centroid,
    make_config,
    mean_square_radius,
    run_wander_experiment,
    sweep_cn2,
)
from .phase_screen import (
    PhaseScreen,
    SimGrid,
    SourceParams,
    StructureFunctionTable,
    effective_r1,
    generate_source_coherence_screen,
    generate_turbulence_screen,
    lambda_c_for_ratio,
    read_screen,
    screen_structure_function,
    write_screen,
)
from .propagation import (
    ComplexField,
    PropagationDiagnostics,
    PropagationPlan,
    absorbing_window,
    angular_spectrum_step,
    apply_screen,
    initial_field,
    make_plan,
    propagate,
)
from .spectra import (
    TurbulenceParams,
    beam_tilt_phase_variance,
    phase_psd,
    theoretical_phase_structure_function,
    von_karman_psd,
)

__version__ = "0.1.0"

__all__ = [
    "BeamwanderError",
    "ComplexField",
    "ConfigError",
    "DegenerateInputError",
    "ExperimentConfig",
    "GeometryParams",
    "InputMismatchError",
    "NumericalAccuracyError",
    "ParameterDomainError",
    "PhaseScreen",
    "PropagationDiagnostics",
    "PropagationPlan",
    "ResolutionError",
    "ResolutionWarning",
    "SimGrid",
    "SourceParams",
    "StepSizeError",
    "SweepRow",
    "StructureFunctionTable",
    "TurbulenceParams",
    "WanderPrediction",
    "WanderStats",
    "absorbing_window",
    "angular_spectrum_step",
    "apply_screen",
    "beam_radius_squared",
    "beam_tilt_phase_variance",
    "centroid",
    "classic_wander",
    "cross_correlation_wander",
    "effective_r1",
    "generate_source_coherence_screen",
    "generate_turbulence_screen",
    "i1_integral",
    "initial_field",
    "lambda_c_for_ratio",
    "make_config",
    "make_plan",
    "mean_square_radius",
    "phase_psd",
    "propagate",
    "read_screen",
    "run_wander_experiment",
    "screen_structure_function",
    "strong_turbulence_condition",
    "sweep_cn2",
    "theoretical_phase_structure_function",
    "turbulence_spread",
    "von_karman_psd",
    "wander_variance_weak",
    "write_screen",
]
