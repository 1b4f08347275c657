"""Doubly-dispersive channel: discrete delay-Doppler paths applied to sample streams.

A channel realization is a short list of paths, each a complex gain, a delay and a
Doppler shift. Delays are rounded to whole samples when applied; each path carries a
single Doppler frequency that is constant over the stream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .multicarrier import SampleStream, demodulate, modulate
from .transforms import FrameParams, isfft, sfft

__all__ = [
    "SPEED_OF_LIGHT",
    "PathTap",
    "ChannelProfile",
    "ChannelRealization",
    "PROFILES",
    "get_profile",
    "doppler_shift",
    "realize_profile",
    "snap_to_grid",
    "apply",
    "add_awgn",
    "tf_oracle_matrix",
    "dd_oracle_matrix",
    "tf_symbol_blocks",
]

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class PathTap:
    gain: complex
    delay: float  # seconds
    doppler: float = 0.0  # Hz

    def __post_init__(self):
        if not self.delay >= 0:
            raise ValueError(f"path delay must be >= 0, got {self.delay!r}")
        if not (np.isfinite(abs(self.gain)) and abs(self.gain) > 0):
            raise ValueError(f"path gain must be finite and nonzero, got {self.gain!r}")
        if not np.isfinite(self.doppler):
            raise ValueError("path Doppler must be finite")


@dataclass(frozen=True)
class ChannelRealization:
    taps: tuple[PathTap, ...]
    profile_name: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple(self.taps))
        if not self.taps:
            raise ValueError("a channel realization needs at least one tap")

    @property
    def power(self) -> float:
        return float(sum(abs(t.gain) ** 2 for t in self.taps))

    @property
    def max_delay(self) -> float:
        return max(t.delay for t in self.taps)

    def delay_samples(self, sample_rate: float) -> np.ndarray:
        return np.array([int(round(t.delay * sample_rate)) for t in self.taps])

    @classmethod
    def identity(cls) -> "ChannelRealization":
        return cls((PathTap(1.0, 0.0, 0.0),), "identity")


@dataclass(frozen=True)
class ChannelProfile:
    """Power-delay profile plus a Doppler model.

    ``doppler_model`` is ``"jakes-angle"`` (each tap gets ``doppler_max*cos(theta)``
    with a uniform random angle) or ``"fixed-per-tap"`` (every tap at ``doppler_max``).
    """

    tap_delays: tuple[float, ...]
    tap_powers_db: tuple[float, ...]
    doppler_max: float = 0.0
    doppler_model: str = "jakes-angle"
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "tap_delays", tuple(float(d) for d in self.tap_delays))
        object.__setattr__(self, "tap_powers_db", tuple(float(p) for p in self.tap_powers_db))
        if len(self.tap_delays) != len(self.tap_powers_db):
            raise ValueError("tap_delays and tap_powers_db must have equal length")
        if np.any(np.diff(self.tap_delays) < 0) or any(d < 0 for d in self.tap_delays):
            raise ValueError("tap delays must be non-negative and non-decreasing")
        if not np.all(np.isfinite(self.tap_powers_db)):
            raise ValueError("tap powers must be finite")
        if self.doppler_model not in ("jakes-angle", "fixed-per-tap"):
            raise ValueError(f"unknown doppler_model {self.doppler_model!r}")

    def with_doppler(self, doppler_max: float, doppler_model: str | None = None) -> "ChannelProfile":
        return replace(self, doppler_max=float(doppler_max),
                       doppler_model=doppler_model or self.doppler_model)


# 3GPP TS 36.101 Annex B.2.1 (EVA, ETU)
PROFILES = {
    "ETU": ChannelProfile(
        (0, 50e-9, 120e-9, 200e-9, 230e-9, 500e-9, 1600e-9, 2300e-9, 5000e-9),
        (-1, -1, -1, 0, 0, 0, -3, -5, -7), 300.0, name="ETU"),
    "EVA": ChannelProfile(
        (0, 30e-9, 150e-9, 310e-9, 370e-9, 710e-9, 1090e-9, 1730e-9, 2510e-9),
        (0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9), 70.0, name="EVA"),
    "single-tap": ChannelProfile((0.0,), (0.0,), 0.0, name="single-tap"),
    "two-tap": ChannelProfile((0.0, 2e-6), (0.0, 0.0), 0.0, name="two-tap"),
}


def get_profile(name: str, doppler_max: float | None = None,
                doppler_model: str | None = None) -> ChannelProfile:
    try:
        prof = PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown channel profile {name!r}; built-ins are {sorted(PROFILES)}") from None
    if doppler_max is None and doppler_model is None:
        return prof
    return prof.with_doppler(prof.doppler_max if doppler_max is None else doppler_max, doppler_model)


def doppler_shift(speed: float, carrier: float) -> float:
    """Maximum Doppler shift in Hz for a terminal moving at ``speed`` m/s."""
    return speed * carrier / SPEED_OF_LIGHT


def realize_profile(profile: ChannelProfile, seed=None) -> ChannelRealization:
    """Draw tap phases (and Doppler angles) for one realization of ``profile``.

    Tap magnitudes follow the power profile exactly, normalized to unit total power.
    """
    if not profile.tap_delays:
        raise ValueError("empty channel profile")
    rng = np.random.default_rng(seed)
    n = len(profile.tap_delays)
    power = 10.0 ** (np.asarray(profile.tap_powers_db) / 10.0)
    amp = np.sqrt(power / power.sum())
    phase = rng.uniform(0.0, 2 * np.pi, n)
    if profile.doppler_model == "jakes-angle":
        doppler = profile.doppler_max * np.cos(rng.uniform(0.0, 2 * np.pi, n))
    else:
        doppler = np.full(n, profile.doppler_max)
    taps = tuple(PathTap(complex(a * np.exp(1j * ph)), d, float(nu))
                 for a, ph, d, nu in zip(amp, phase, profile.tap_delays, doppler))
    return ChannelRealization(taps, profile.name, seed if isinstance(seed, int) else None)


def snap_to_grid(ch: ChannelRealization, p: FrameParams) -> ChannelRealization:
    """Round every tap onto the frame's delay and Doppler lattice."""
    dr, nr = p.delay_resolution, p.doppler_resolution
    taps = tuple(PathTap(t.gain, round(t.delay / dr) * dr, round(t.doppler / nr) * nr)
                 for t in ch.taps)
    return replace(ch, taps=taps)


def apply(s: SampleStream, ch: ChannelRealization, cp_len: int | None = None,
          start: int = 0) -> SampleStream:
    """Pass ``s`` through the channel; the trailing echo beyond the input length is cut.

    ``r[n] = sum_i g_i * s[n - d_i] * exp(2j*pi*nu_i*(n - d_i)/fs)`` with ``d_i`` the
    tap delay rounded to samples. ``start`` offsets the absolute time index of the
    first sample (Doppler phase reference). If ``cp_len`` is given, a warning is
    raised for taps longer than the cyclic prefix.
    """
    x = s.samples
    L = x.shape[-1]
    delays = ch.delay_samples(s.sample_rate)
    if L and np.any(delays >= L):
        raise ValueError(f"tap delay of {delays.max()} samples exceeds stream length {L}")
    if cp_len is not None and delays.max() > cp_len:
        warnings.warn(f"channel delay of {delays.max()} samples exceeds the {cp_len}-sample "
                      "cyclic prefix; inter-symbol interference will occur", stacklevel=2)
    t = (np.arange(L) + start) / s.sample_rate
    # taps sharing a sample delay collapse into one time-varying coefficient
    coeff = {}
    for tap, d in zip(ch.taps, delays):
        c = tap.gain * np.exp(2j * np.pi * tap.doppler * t[: L - d])
        coeff[d] = coeff[d] + c if d in coeff else c
    out = np.zeros_like(x)
    for d, c in coeff.items():
        out[..., d:] += c * x[..., : L - d]
    return SampleStream(out, s.sample_rate)


def add_awgn(s: SampleStream, snr_db: float, signal_power: float = 1.0, seed=None) -> SampleStream:
    """Add circularly-symmetric Gaussian noise of variance ``signal_power / 10**(snr_db/10)``."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    var = signal_power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    shape = s.samples.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return SampleStream(s.samples + np.sqrt(var / 2) * noise, s.sample_rate)


def _impulse_batch(p: FrameParams) -> np.ndarray:
    return np.eye(p.size, dtype=complex).reshape(p.size, p.M, p.N)


def tf_oracle_matrix(ch: ChannelRealization, p: FrameParams) -> np.ndarray:
    """End-to-end map from vectorized TF input to TF output (OFDM view), built from impulses."""
    rx = demodulate(apply(modulate(_impulse_batch(p), p), ch, p.cp_len), p)
    return rx.reshape(p.size, p.size).T


def dd_oracle_matrix(ch: ChannelRealization, p: FrameParams) -> np.ndarray:
    """End-to-end map from vectorized DD input to DD output (OTFS view), built from impulses.

    Column ``i`` is the noiseless received DD grid, flattened in C order
    (``i = l*N + k``), for a unit symbol at flat position ``i``.
    """
    tx = modulate(isfft(_impulse_batch(p), p), p)
    rx = sfft(demodulate(apply(tx, ch, p.cp_len), p), p)
    return rx.reshape(p.size, p.size).T


def tf_symbol_blocks(ch: ChannelRealization, p: FrameParams) -> np.ndarray:
    """Per-symbol subcarrier coupling matrices, shape ``(N, M, M)``.

    ``blocks[n][m_out, m_in]`` is the response on subcarrier ``m_out`` of symbol ``n``
    to a unit input on subcarrier ``m_in`` of the same symbol. Requires every tap
    delay to fit in the cyclic prefix, in which case symbols do not couple and these
    blocks are exactly the diagonal blocks of :func:`tf_oracle_matrix`.
    """
    if ch.delay_samples(p.sample_rate).max() > p.cp_len:
        raise ValueError("tf_symbol_blocks needs every tap delay within the cyclic prefix")
    one = FrameParams(p.M, 1, p.delta_f, p.cp_len)
    tx = modulate(np.eye(p.M, dtype=complex).reshape(p.M, p.M, 1), one)
    blocks = np.empty((p.N, p.M, p.M), dtype=complex)
    for n in range(p.N):
        rx = demodulate(apply(tx, ch, start=n * p.symbol_len), one)
        blocks[n] = rx[..., 0].T
    return blocks
