"""Gray-labelled square QAM with unit average power and max-log LLR demapping.

Bits are grouped MSB first per symbol. Even-indexed bits of a group drive the
in-phase axis and odd-indexed bits the quadrature axis; within an axis the first
bit is the sign (0 -> positive) and the rest select the amplitude in Gray order.
LLRs use the convention ``llr = log P(b=0) / P(b=1)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["BITS_PER_SYMBOL", "constellation", "qam_map", "qam_demap"]

BITS_PER_SYMBOL = {"QPSK": 2, "16QAM": 4, "64QAM": 6}


def _pam_level(bits) -> int:
    # 2**(k-1) - (1-2b) * level(rest), bottoming out at 1
    if not bits:
        return 1
    return 2 ** len(bits) - (1 - 2 * bits[0]) * _pam_level(bits[1:])


@lru_cache(maxsize=None)
def constellation(modulation: str) -> np.ndarray:
    """Symbols indexed by their integer label (MSB-first bit groups)."""
    try:
        q = BITS_PER_SYMBOL[modulation]
    except KeyError:
        raise ValueError(f"unknown modulation {modulation!r}") from None
    pts = np.empty(2**q, dtype=complex)
    for label in range(2**q):
        b = [(label >> (q - 1 - i)) & 1 for i in range(q)]
        bi, bq = b[0::2], b[1::2]
        re = (1 - 2 * bi[0]) * _pam_level(bi[1:])
        im = (1 - 2 * bq[0]) * _pam_level(bq[1:])
        pts[label] = re + 1j * im
    pts /= np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    return pts


def _labels(modulation: str) -> np.ndarray:
    q = BITS_PER_SYMBOL[modulation]
    return (np.arange(2**q)[:, None] >> np.arange(q - 1, -1, -1)) & 1


def qam_map(bits, modulation: str) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    pts = constellation(modulation)
    q = BITS_PER_SYMBOL[modulation]
    if bits.shape[-1] % q:
        raise ValueError(f"{bits.shape[-1]} bits is not a multiple of {q} bits per symbol")
    groups = bits.reshape(*bits.shape[:-1], -1, q)
    return pts[groups @ (1 << np.arange(q - 1, -1, -1))]


def qam_demap(symbols, modulation: str, noise_variance=1.0):
    """Return ``(hard_bits, llrs)``; ``noise_variance`` may vary per symbol."""
    y = np.asarray(symbols, dtype=complex)
    pts = constellation(modulation)
    labels = _labels(modulation)
    q = labels.shape[1]
    d2 = np.abs(y[..., None] - pts) ** 2  # (..., S, 2**q)
    hard = labels[np.argmin(d2, axis=-1)]
    llr = np.empty(y.shape + (q,))
    for j in range(q):
        one = labels[:, j] == 1
        llr[..., j] = d2[..., one].min(axis=-1) - d2[..., ~one].min(axis=-1)
    llr /= np.asarray(noise_variance, dtype=float)[..., None]
    shape = y.shape[:-1] + (y.shape[-1] * q,) if y.ndim else (q,)
    return hard.reshape(shape), llr.reshape(shape)
