"""Singly-charged quantum dot molecule trion "W" system.

Level structure and optical selection rules of the coupled-dot trion,
open-system spin-pumping dynamics, measurement-protocol drivers and a
spectral-map parameter fitter.
"""

__version__ = "0.1.0"

from .params import ModelParams, CoTunnelingProfile, validate_params, ghz_to_microev
from .basis import BasisState, StateIndex, enumerate_basis

__all__ = [
    "ModelParams", "CoTunnelingProfile", "validate_params", "ghz_to_microev",
    "BasisState", "StateIndex", "enumerate_basis",
]
