"""Symplectic finite Fourier transforms between the delay-Doppler and time-frequency grids.

Grids are plain complex ndarrays of shape ``(..., M, N)``. A delay-Doppler grid is
indexed ``dd[l, k]`` (delay ``l``, Doppler ``k``); a time-frequency grid is indexed
``tf[m, n]`` (subcarrier ``m``, multicarrier symbol ``n``). Leading axes are batch
axes and are carried through untouched.

Convention used throughout the package::

    X[m, n] = 1/sqrt(MN) * sum_{k, l} x[l, k] * exp(+2j*pi*n*k/N) * exp(-2j*pi*m*l/M)

i.e. a unitary inverse DFT along Doppler -> time and a unitary forward DFT along
delay -> frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, ifft

__all__ = ["FrameParams", "isfft", "sfft", "basis_function", "check_grid"]


@dataclass(frozen=True)
class FrameParams:
    """Dimensions and numerology of one OTFS/OFDM frame.

    ``M`` subcarriers (delay bins), ``N`` multicarrier symbols (Doppler bins),
    subcarrier spacing ``delta_f`` in Hz and cyclic prefix length ``cp_len`` in
    samples. The sample rate is fixed to ``M * delta_f``.
    """

    M: int
    N: int
    delta_f: float = 15e3
    cp_len: int = 0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not np.isfinite(self.delta_f) or self.delta_f <= 0:
            raise ValueError(f"delta_f must be positive, got {self.delta_f!r}")
        if int(self.cp_len) != self.cp_len or self.cp_len < 0:
            raise ValueError(f"cp_len must be a non-negative integer, got {self.cp_len!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.N)

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def sample_rate(self) -> float:
        return self.M * self.delta_f

    @property
    def symbol_len(self) -> int:
        """Samples per multicarrier symbol including the cyclic prefix."""
        return self.M + self.cp_len

    @property
    def frame_len(self) -> int:
        return self.N * self.symbol_len

    @property
    def symbol_duration(self) -> float:
        return self.symbol_len / self.sample_rate

    @property
    def cp_duration(self) -> float:
        return self.cp_len / self.sample_rate

    @property
    def delay_resolution(self) -> float:
        return 1.0 / (self.M * self.delta_f)

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.N * self.symbol_duration)


def check_grid(grid, p: FrameParams, what: str = "grid") -> np.ndarray:
    """Return ``grid`` as a complex array after checking its trailing shape."""
    grid = np.asarray(grid)
    if grid.ndim < 2 or grid.shape[-2:] != p.shape:
        raise ValueError(f"{what} has shape {grid.shape}, expected (..., {p.M}, {p.N})")
    return grid.astype(complex, copy=False)


def isfft(dd, p: FrameParams) -> np.ndarray:
    """Delay-Doppler grid -> time-frequency grid (unitary)."""
    dd = check_grid(dd, p, "delay-Doppler grid")
    return fft(ifft(dd, axis=-1, norm="ortho"), axis=-2, norm="ortho")


def sfft(tf, p: FrameParams) -> np.ndarray:
    """Time-frequency grid -> delay-Doppler grid; exact inverse of :func:`isfft`."""
    tf = check_grid(tf, p, "time-frequency grid")
    return ifft(fft(tf, axis=-1, norm="ortho"), axis=-2, norm="ortho")


def basis_function(k: int, l: int, p: FrameParams) -> np.ndarray:
    """Time-frequency footprint of the unit symbol at Doppler ``k`` and delay ``l``."""
    if not (0 <= k < p.N) or not (0 <= l < p.M):
        raise ValueError(f"index (k={k}, l={l}) outside {p.N} Doppler x {p.M} delay bins")
    dd = np.zeros(p.shape, dtype=complex)
    dd[l, k] = 1.0
    return isfft(dd, p)
