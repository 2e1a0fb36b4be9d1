"""Coupled-mode simulator for a three-mode, four-pump directional
phase-sensitive parametric amplifier."""

from .config import DeviceConfig, load_config, write_config
from .coupled_modes import (
    DetuningVector,
    GainSummary,
    ModeParams,
    PumpSet,
    build_coupling_matrix,
    closed_form_scattering,
    gain_summary,
    scattering_matrix,
    simulate,
    sweep_scattering,
)
from .errors import FPJAError
from .noise import InputOccupancies, added_noise_fpja, noise_report, output_covariance
from .quadrature import lo_phase_response, quadrature_matrix, squeezing_metrics
from .stability import characteristic_roots, performance_bounds, routh_coefficients, stability_region
from .tuning import TuningTargets, program_device

__version__ = "0.1.0"

__all__ = [
    "DetuningVector", "DeviceConfig", "FPJAError", "GainSummary", "InputOccupancies", "ModeParams",
    "PumpSet", "TuningTargets", "added_noise_fpja", "build_coupling_matrix", "characteristic_roots",
    "closed_form_scattering", "gain_summary", "lo_phase_response", "load_config", "noise_report",
    "output_covariance", "performance_bounds", "program_device", "quadrature_matrix",
    "routh_coefficients", "scattering_matrix", "simulate", "squeezing_metrics", "stability_region",
    "sweep_scattering", "write_config",
]
