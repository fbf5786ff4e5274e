"""Spectrally constrained Krotov optimization for few-level quantum systems.

The package splits into propagation (:mod:`~spectral_krotov.dynamics`),
constraint kernels (:mod:`~spectral_krotov.constraints`), the Fredholm
solver pair (:mod:`~spectral_krotov.fredholm`), the optimization loop
(:mod:`~spectral_krotov.krotov`), and scenario/CLI plumbing.
"""

from .constraints import (
    AmplitudeConstraint,
    FieldSpectrum,
    KernelComponent,
    PSDReport,
    SpectralKernel,
    amplitude_cost,
    band_power_fraction,
    check_psd,
    field_spectrum,
    kernel_freq,
    kernel_time,
    sin2_ramp,
    spectral_centroid,
    spectral_cost,
)
from .dynamics import (
    LevelSystem,
    StateTrajectory,
    TargetSpec,
    TimeGrid,
    adjoint_boundary,
    hamiltonian,
    populations,
    propagate,
)
from .errors import (
    ConfigError,
    IndefiniteKernelError,
    InvalidInputError,
    PathwayError,
    SingularSystemError,
    SpectralKrotovError,
)
from .fredholm import (
    DegenerateApproximation,
    FredholmProblem,
    assemble_system,
    fine_residual,
    hat_basis,
    overlap_matrix,
    rescale_problem,
    solve_degenerate,
    solve_nystrom,
)
from .krotov import (
    ControlField,
    IterationEntry,
    OptimizationConfig,
    OptimizationRecord,
    RefinementReport,
    RefinementSettings,
    compute_inhomogeneity,
    functional_value,
    krotov_step_spectral,
    krotov_step_unconstrained,
    optimize,
)
from .scenario import ScenarioConfig, build_guess, parse_config

__version__ = "0.1.0"

__all__ = [
    "AmplitudeConstraint",
    "ConfigError",
    "ControlField",
    "DegenerateApproximation",
    "FieldSpectrum",
    "FredholmProblem",
    "IndefiniteKernelError",
    "InvalidInputError",
    "IterationEntry",
    "KernelComponent",
    "LevelSystem",
    "OptimizationConfig",
    "OptimizationRecord",
    "PSDReport",
    "PathwayError",
    "RefinementReport",
    "RefinementSettings",
    "ScenarioConfig",
    "SingularSystemError",
    "SpectralKernel",
    "SpectralKrotovError",
    "StateTrajectory",
    "TargetSpec",
    "TimeGrid",
    "adjoint_boundary",
    "amplitude_cost",
    "assemble_system",
    "band_power_fraction",
    "build_guess",
    "check_psd",
    "compute_inhomogeneity",
    "field_spectrum",
    "fine_residual",
    "functional_value",
    "hamiltonian",
    "hat_basis",
    "kernel_freq",
    "kernel_time",
    "krotov_step_spectral",
    "krotov_step_unconstrained",
    "optimize",
    "overlap_matrix",
    "parse_config",
    "populations",
    "propagate",
    "rescale_problem",
    "sin2_ramp",
    "solve_degenerate",
    "solve_nystrom",
    "spectral_centroid",
    "spectral_cost",
    "__version__",
]
