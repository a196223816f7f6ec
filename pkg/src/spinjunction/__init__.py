"""Spin transport through a two-spin junction coupled to polarized XXZ leads."""

from .bath import BathSpec, CorrelationKernel, corr_xx_numeric, corr_xxz_hp, decay_rate, half_fourier
from .born import CurrentTrace, born_current, default_baths, integrate_born, kubo_current, rho_down_down
from .config import RunSpec
from .errors import DegenerateSteadyStateError, NumericalError, ValidationError
from .junction import JunctionSpec, build_hs, build_jump_set
from .oracle import (
    AbsorberSpec,
    ChainModel,
    ChainSpec,
    build_chain_hamiltonian,
    ensemble_average,
    evolve_trajectory,
    evolve_unitary,
    lead_kernels,
)
from .pipeline import ResultBundle, run, sweep
from .spectral import (
    asymptotic_current,
    kubo_rectification_closed,
    rectification,
    spectral_function,
    spectral_function_closed,
    stationary_pi_kernel,
)
from .steady import build_lindblad_local, build_redfield_global, solve_steady, steady_current, steady_pipeline

__all__ = [
    "AbsorberSpec", "BathSpec", "ChainSpec", "CorrelationKernel", "CurrentTrace",
    "DegenerateSteadyStateError", "JunctionSpec", "NumericalError", "ResultBundle", "RunSpec",
    "ValidationError", "asymptotic_current", "born_current", "build_hs", "build_jump_set",
    "build_lindblad_local", "build_redfield_global", "corr_xx_numeric", "corr_xxz_hp",
    "decay_rate", "default_baths", "ensemble_average", "evolve_trajectory", "evolve_unitary",
    "half_fourier", "integrate_born", "kubo_current", "kubo_rectification_closed",
    "rectification", "rho_down_down", "run", "solve_steady", "spectral_function",
    "stationary_pi_kernel", "steady_current", "ChainModel", "build_chain_hamiltonian", "lead_kernels",
    "spectral_function_closed", "steady_pipeline", "sweep",
]
