"""Pseudo-spectral simulation and analysis tools for viscous capillary
compressible flow on periodic domains."""

__version__ = "0.1.0"

from .diagnostics import (
    DiagnosticsAccumulator,
    check_energy_inequality,
    degiorgi_recursion,
    energy,
    level_set_report,
    lp_gain_check,
    write_csv,
)
from .errors import (
    ConfigurationError,
    DomainError,
    NonContraction,
    NumericBlowup,
    ScheduleStall,
    VacuumBreach,
)
from .fields import Grid, RealField, SpectralField
from .lifespan import (
    LifespanInputs,
    lifespan_lower_bound,
    norms_for_data,
    restart_schedule,
)
from .lp_besov import BesovSpec, besov_norm, bony_decompose, build_bumps, decompose
from .model import EffectiveState, PhysParams, PrimitiveState
from .presets import Preset, build
from .solver import (
    PicardConfig,
    RunResult,
    SolverConfig,
    load_checkpoint,
    picard_solve,
    run,
    save_checkpoint,
)

__all__ = [
    "BesovSpec",
    "ConfigurationError",
    "DiagnosticsAccumulator",
    "DomainError",
    "EffectiveState",
    "Grid",
    "LifespanInputs",
    "NonContraction",
    "NumericBlowup",
    "PhysParams",
    "PicardConfig",
    "Preset",
    "PrimitiveState",
    "RealField",
    "RunResult",
    "ScheduleStall",
    "SolverConfig",
    "SpectralField",
    "VacuumBreach",
    "besov_norm",
    "bony_decompose",
    "build",
    "build_bumps",
    "check_energy_inequality",
    "decompose",
    "degiorgi_recursion",
    "energy",
    "level_set_report",
    "lifespan_lower_bound",
    "load_checkpoint",
    "lp_gain_check",
    "norms_for_data",
    "picard_solve",
    "restart_schedule",
    "run",
    "save_checkpoint",
    "write_csv",
    "__version__",
]
