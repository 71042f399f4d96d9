"""Periodic linear sampling method for partially coated gratings (2D TE reduction)."""
from .errors import LSMError, WoodAnomaly
from .greens import WaveParams

__version__ = "0.1.0"

__all__ = ["LSMError", "WaveParams", "WoodAnomaly", "__version__"]
