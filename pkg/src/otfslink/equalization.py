"""Receivers for the linear model ``y = H x + w`` with unit-power symbols.

Everything here assumes genie channel knowledge: ``H`` is the exact end-to-end
effective matrix. The decision-feedback and successive-cancellation receivers feed
back the *true* transmitted symbols, so there is no error propagation.

Both MMSE receivers are expressed through ``A = H^H H + sigma2*I``. Writing
``A = U U^H`` with ``U`` upper triangular (a Cholesky factor taken from the bottom
right), the genie-DFE symbol ``i`` detected in natural order has

    x_hat[i] = ((U^-1 H^H y)[i] - sum_{j<i} conj(U[j, i]) x[j]) / U[i, i]
    SINR[i]  = U[i, i]**2 / sigma2 - 1

which is the MMSE estimate of ``x[i]`` from the system with symbols ``0..i-1``
cancelled. One factorization serves every detection step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .channel import ChannelRealization, dd_oracle_matrix, tf_oracle_matrix
from .transforms import FrameParams

__all__ = [
    "EQUALIZER_KINDS",
    "EqualizerConfig",
    "build_effective_matrix",
    "lmmse",
    "genie_dfe",
    "tf_single_tap",
    "per_symbol_sinr",
    "detection_order",
    "upper_cholesky",
    "dfe_factor",
    "dfe_detect",
    "dfe_from_gram",
    "lmmse_factor",
    "lmmse_detect",
    "lmmse_from_gram",
]

EQUALIZER_KINDS = ("dd-lmmse", "dd-genie-dfe", "tf-single-tap", "tf-genie-sic")


@dataclass(frozen=True)
class EqualizerConfig:
    kind: str
    noise_variance: float
    order: str | tuple[int, ...] = "natural"

    def __post_init__(self):
        if self.kind not in EQUALIZER_KINDS:
            raise ValueError(f"unknown equalizer kind {self.kind!r}")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")


def build_effective_matrix(channels, p: FrameParams, scheme: str) -> np.ndarray:
    """Dense effective matrix for ``scheme`` ("OTFS" or "OFDM").

    ``channels`` is a single realization (SISO) or a nested sequence indexed
    ``channels[r][t]`` over receive and transmit antennas. Block ``(r, t)`` of the
    result maps stream ``t``'s vectorized grid to antenna ``r``'s received grid.
    """
    scheme = scheme.upper()
    if scheme == "OTFS":
        build = dd_oracle_matrix
    elif scheme == "OFDM":
        build = tf_oracle_matrix
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if isinstance(channels, ChannelRealization):
        return build(channels, p)
    return np.block([[build(ch, p) for ch in row] for row in channels])


def _solve_triangular(U, b, lower=False):
    if U.ndim == 2:
        return sla.solve_triangular(U, b, lower=lower, check_finite=False)
    return np.linalg.solve(U, b[..., None])[..., 0]


def upper_cholesky(A: np.ndarray) -> np.ndarray:
    """Upper-triangular ``U`` with ``A = U U^H``; batched over leading axes."""
    try:
        L = np.linalg.cholesky(A[..., ::-1, ::-1])
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular system: H^H H + sigma2*I is not positive definite") from exc
    return L[..., ::-1, ::-1]


def _regularized_gram(gram, noise_variance):
    n = gram.shape[-1]
    return gram + noise_variance * np.eye(n)


def dfe_factor(gram, noise_variance):
    """Factor ``H^H H + sigma2*I = U U^H``; returns ``(U, sinr)`` for natural order."""
    U = upper_cholesky(_regularized_gram(gram, noise_variance))
    d = np.real(np.diagonal(U, axis1=-2, axis2=-1))
    with np.errstate(divide="ignore"):
        sinr = d**2 / noise_variance - 1.0
    return U, sinr


def dfe_detect(U, matched, true_x):
    """Genie-DFE estimates from a :func:`dfe_factor` factor and ``H^H y``."""
    d = np.real(np.diagonal(U, axis1=-2, axis2=-1))
    v = _solve_triangular(U, matched)
    # sum_{j<i} conj(U[j, i]) x[j] == (U^H x)[i] - U[i, i] x[i]
    fb = np.einsum("...ji,...j->...i", U.conj(), true_x) - d * true_x
    return (v - fb) / d


def dfe_from_gram(gram, matched, noise_variance, true_x=None):
    """Genie DFE in natural order from ``H^H H`` and ``H^H y``.

    Returns ``(x_hat, sinr)`` where ``x_hat`` is the (biased) MMSE estimate at each
    detection step. ``matched`` and ``true_x`` may be omitted to get SINRs only.
    """
    U, sinr = dfe_factor(gram, noise_variance)
    if matched is None:
        return None, sinr
    return dfe_detect(U, matched, true_x), sinr


def lmmse_factor(gram, noise_variance):
    """Return ``(Uinv, sinr)`` with ``(H^H H + sigma2*I)^-1 = Uinv^H Uinv``."""
    A = _regularized_gram(gram, noise_variance)
    U = upper_cholesky(A)
    eye = np.broadcast_to(np.eye(A.shape[-1]), A.shape).copy()
    Uinv = _solve_triangular(U, eye) if A.ndim == 2 else np.linalg.solve(U, eye)
    # diag(A^-1)_i = sum_j |Uinv[j, i]|^2
    mse = noise_variance * np.sum(np.abs(Uinv) ** 2, axis=-2)
    with np.errstate(divide="ignore"):
        sinr = 1.0 / mse - 1.0
    return Uinv, sinr


def lmmse_detect(Uinv, matched):
    return np.einsum("...ji,...j->...i", Uinv.conj(), np.einsum("...ij,...j->...i", Uinv, matched))


def lmmse_from_gram(gram, matched, noise_variance):
    """Linear MMSE from ``H^H H`` and ``H^H y``; returns ``(x_hat, sinr)``."""
    Uinv, sinr = lmmse_factor(gram, noise_variance)
    if matched is None:
        return None, sinr
    return lmmse_detect(Uinv, matched), sinr


def lmmse(y, H, noise_variance: float) -> np.ndarray:
    """``x_hat = (H^H H + sigma2*I)^-1 H^H y``."""
    H = np.asarray(H, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if H.shape[-2] != y.shape[-1]:
        raise ValueError(f"H has {H.shape[-2]} rows but y has length {y.shape[-1]}")
    Hh = np.swapaxes(H.conj(), -1, -2)
    U = upper_cholesky(_regularized_gram(Hh @ H, noise_variance))
    b = (Hh @ y[..., None])[..., 0]
    if H.ndim == 2 and b.ndim > 1:
        # one H, many received vectors: solve for all columns at once
        flat = b.reshape(-1, b.shape[-1]).T
        v = sla.solve_triangular(U, flat, check_finite=False)
        x = sla.solve_triangular(U.conj().T, v, lower=True, check_finite=False)
        return x.T.reshape(b.shape)
    v = _solve_triangular(U, b)
    return _solve_triangular(np.swapaxes(U.conj(), -1, -2), v, lower=True)


def detection_order(H, order="natural") -> np.ndarray:
    """Permutation of columns: ``"natural"``, ``"norm"`` (strongest first) or explicit."""
    n = np.shape(H)[-1]
    if isinstance(order, str):
        if order == "natural":
            return np.arange(n)
        if order == "norm":
            return np.argsort(-np.sum(np.abs(H) ** 2, axis=-2), kind="stable")
        raise ValueError(f"unknown detection order {order!r}")
    perm = np.asarray(order, dtype=int)
    if sorted(perm.tolist()) != list(range(n)):
        raise ValueError("detection order must be a permutation of the columns")
    return perm


def genie_dfe(y, H, noise_variance: float, true_x, order: str | Sequence[int] = "natural"):
    """MMSE decision-feedback equalizer with genie (true-symbol) cancellation."""
    H = np.asarray(H, dtype=complex)
    y = np.asarray(y, dtype=complex)
    true_x = np.asarray(true_x, dtype=complex)
    if H.shape[-2] != y.shape[-1] or H.shape[-1] != true_x.shape[-1]:
        raise ValueError("dimensions of y, H and true_x are inconsistent")
    perm = detection_order(H, order)
    Hp = H[..., perm]
    Hh = np.swapaxes(Hp.conj(), -1, -2)
    x_p, _ = dfe_from_gram(Hh @ Hp, (Hh @ y[..., None])[..., 0], noise_variance, true_x[..., perm])
    out = np.empty_like(x_p)
    out[..., perm] = x_p
    return out


def tf_single_tap(y_tf, h, noise_variance: float) -> np.ndarray:
    """Per-bin MMSE scaling ``conj(h) y / (|h|^2 + sigma2)``."""
    h = np.asarray(h)
    return np.conj(h) * np.asarray(y_tf) / (np.abs(h) ** 2 + noise_variance)


def per_symbol_sinr(H, noise_variance: float, kind: str, order="natural") -> np.ndarray:
    """Post-equalization SINR per symbol (unbiased MMSE convention).

    For ``tf-single-tap`` ``H`` holds the per-bin gains; otherwise it is the effective
    matrix (or a batch of per-bin matrices for ``tf-genie-sic``).
    """
    if kind == "tf-single-tap":
        return np.abs(np.asarray(H)) ** 2 / noise_variance
    H = np.asarray(H, dtype=complex)
    Hh = np.swapaxes(H.conj(), -1, -2)
    if kind == "dd-lmmse":
        return lmmse_from_gram(Hh @ H, None, noise_variance)[1]
    if kind in ("dd-genie-dfe", "tf-genie-sic"):
        perm = detection_order(H, order)
        Hp = H[..., perm]
        Hh = np.swapaxes(Hp.conj(), -1, -2)
        s = dfe_from_gram(Hh @ Hp, None, noise_variance)[1]
        out = np.empty_like(s)
        out[..., perm] = s
        return out
    raise ValueError(f"unknown equalizer kind {kind!r}")
