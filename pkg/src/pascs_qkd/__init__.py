"""Secret key rates for discrete-modulated CV-QKD with photon-added-then-subtracted
coherent states and a coherent-state baseline."""

__version__ = "0.1.0"

from .analysis import (
    NoSecureKeyError,
    SweepSpec,
    compare_protocols,
    optimize_alpha,
    sweep_distance,
)
from .channel import ChannelParams, DetectionParams, SignConvention
from .fock import FockVector, TruncationError
from .keyrate import MutualInfoConvention, RatePoint, UnphysicalError, key_rate
from .modulation import ModulationEnsemble, StateFamily

__all__ = [
    "ChannelParams",
    "DetectionParams",
    "FockVector",
    "ModulationEnsemble",
    "MutualInfoConvention",
    "NoSecureKeyError",
    "RatePoint",
    "SignConvention",
    "StateFamily",
    "SweepSpec",
    "TruncationError",
    "UnphysicalError",
    "compare_protocols",
    "key_rate",
    "optimize_alpha",
    "sweep_distance",
]
