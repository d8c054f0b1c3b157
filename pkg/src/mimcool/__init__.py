"""Dynamical back-action cooling of a membrane mode in a driven optical cavity.

Submodules: params (configuration and constants), slab (membrane optics),
steady (static working point and couplings), response (dressed mechanical
response and stability), spectra (noise spectra and detection), thermometry
(temperature estimators), peakfit (synthetic spectra and Lorentzian fits),
oracle (time-domain Langevin integration) and cli.
"""

from .params import SystemParams, build_params, load_config, nominal_params, strong_params
from .response import effective_dynamics, full_stability
from .spectra import detect, s_q
from .steady import OperatingPoint, operating_point, prepare, solve_at, solve_steady
from .thermometry import TemperatureReport, analytic_report

__version__ = "0.1.0"

__all__ = [
    "SystemParams", "build_params", "load_config", "nominal_params", "strong_params",
    "effective_dynamics", "full_stability", "detect", "s_q", "OperatingPoint",
    "operating_point", "prepare", "solve_at", "solve_steady", "TemperatureReport",
    "analytic_report",
]
