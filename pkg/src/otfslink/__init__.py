"""OTFS modulation over CP-OFDM: transforms, channels, estimation, equalization, link simulation."""

from .transforms import FrameParams, basis_function, isfft, sfft
from .multicarrier import SampleStream, demodulate, modulate

__all__ = ["FrameParams", "SampleStream", "basis_function", "demodulate", "isfft", "modulate", "sfft"]
__version__ = "0.1.0"
