"""CP-OFDM modulator and demodulator (the multicarrier carrier under OTFS)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, ifft

from .transforms import FrameParams, check_grid

__all__ = ["SampleStream", "modulate", "demodulate"]


@dataclass(frozen=True)
class SampleStream:
    """Complex baseband samples along the last axis, at ``sample_rate`` Hz."""

    samples: np.ndarray
    sample_rate: float

    def __len__(self):
        return self.samples.shape[-1]

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")


def modulate(tf, p: FrameParams) -> SampleStream:
    """Turn each time-frequency column into one CP-OFDM symbol and concatenate."""
    tf = check_grid(tf, p, "time-frequency grid")
    body = ifft(tf, axis=-2, norm="ortho")  # (..., M, N)
    if p.cp_len:
        body = np.concatenate([body[..., -p.cp_len:, :], body], axis=-2)
    # symbol-major time order
    samples = np.swapaxes(body, -1, -2).reshape(*tf.shape[:-2], p.frame_len)
    return SampleStream(samples, p.sample_rate)


def demodulate(s: SampleStream, p: FrameParams) -> np.ndarray:
    """Drop each cyclic prefix and take the unitary length-M DFT of every symbol."""
    if len(s) != p.frame_len:
        raise ValueError(f"stream has {len(s)} samples, frame needs {p.frame_len}")
    if not np.isclose(s.sample_rate, p.sample_rate, rtol=1e-12):
        raise ValueError(f"sample rate {s.sample_rate} does not match frame rate {p.sample_rate}")
    x = s.samples.reshape(*s.samples.shape[:-1], p.N, p.symbol_len)[..., p.cp_len:]
    return np.swapaxes(fft(x, axis=-1, norm="ortho"), -1, -2)
