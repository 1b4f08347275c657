"""Monte Carlo link-level simulation of OTFS and OFDM over the same channels.

One trial draws a channel per antenna pair, then for every SNR and payload layout
sends a frame through the full chain (encode, map, [ISFFT], CP-OFDM, channel, AWGN,
demodulate, [SFFT]) and equalizes with genie channel knowledge. OTFS and OFDM share
channel, data and noise seeds within a trial, so their difference is low-variance.

Per-trial seeds derive from ``(master_seed, trial index, purpose, ...)`` through
:class:`numpy.random.SeedSequence`; results do not depend on execution order or on
the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats
from scipy.fft import fft, ifft

from ..channel import ChannelRealization, add_awgn, apply, realize_profile, snap_to_grid, tf_symbol_blocks
from ..equalization import dfe_detect, dfe_factor, lmmse_detect, lmmse_factor
from ..multicarrier import SampleStream, demodulate, modulate
from ..transforms import FrameParams, isfft, sfft
from .config import MCS, ChannelSpec, ConfigError, LinkConfig
from .fec import code_rate, coded_length, fec_decode, fec_encode, max_info_bits
from .qam import qam_demap, qam_map

__all__ = [
    "CSV_HEADER",
    "Layout",
    "SimRow",
    "SimResult",
    "draw_channels",
    "run_link",
    "run_codeblock_study",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("scheme", "snr_db", "mcs", "trials", "bit_errors", "ber",
              "block_errors", "bler", "throughput", "seed")

_CHANNEL, _DATA, _NOISE = 0, 1, 2


def _key(text: str) -> int:
    return zlib.crc32(text.encode())


def _seed(cfg: LinkConfig, trial: int, *tags: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.master_seed, spawn_key=(trial, *tags))


@dataclass(frozen=True)
class Layout:
    """How one layer's frame is filled: ``n_blocks`` codeblocks of ``info_bits`` each.

    Codeblock ``c`` occupies coded bits ``[c*coded_len, (c+1)*coded_len)`` of the
    layer, i.e. a contiguous run of the C-order flattened grid (a band of delay bins
    for OTFS, a band of subcarriers for OFDM). Leftover bits carry random filler.
    """

    mcs: MCS
    info_bits: int
    frame_size: int
    label: str

    @classmethod
    def make(cls, mcs: MCS, p: FrameParams, codeblock_bits: int = 0, label: str | None = None):
        cap = p.size * mcs.bits_per_symbol
        k = codeblock_bits or max_info_bits(cap, mcs.code)
        if k < 1 or coded_length(k, mcs.code) > cap:
            raise ConfigError(f"link.codeblock_bits: {k} bits do not fit {cap} coded bits ({mcs.name})")
        return cls(mcs, k, p.size, label or mcs.name)

    @property
    def layer_bits(self) -> int:
        return self.frame_size * self.mcs.bits_per_symbol

    @property
    def coded_len(self) -> int:
        return coded_length(self.info_bits, self.mcs.code)

    @property
    def n_blocks(self) -> int:
        return self.layer_bits // self.coded_len

    @cached_property
    def interleaver(self) -> np.ndarray:
        # fixed pseudo-random bit interleaver within each codeblock
        return np.random.default_rng(self.coded_len).permutation(self.coded_len)


@dataclass(frozen=True)
class SimRow:
    scheme: str
    snr_db: float
    mcs: str
    trials: int
    bit_errors: int
    total_bits: int
    block_errors: int
    total_blocks: int
    rate: float
    bits_per_symbol: int
    seed: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.total_bits

    @property
    def bler(self) -> float:
        return self.block_errors / self.total_blocks

    @property
    def throughput(self) -> float:
        """Information bits per channel use per stream."""
        return (1.0 - self.bler) * self.rate * self.bits_per_symbol

    def bler_ci(self, level: float = 0.95) -> tuple[float, float]:
        return _clopper_pearson(self.block_errors, self.total_blocks, level)

    def ber_ci(self, level: float = 0.95) -> tuple[float, float]:
        return _clopper_pearson(self.bit_errors, self.total_bits, level)

    def csv_fields(self) -> list[str]:
        return [self.scheme, f"{self.snr_db:.6g}", self.mcs, str(self.trials),
                str(self.bit_errors), f"{self.ber:.6g}", str(self.block_errors),
                f"{self.bler:.6g}", f"{self.throughput:.6g}", str(self.seed)]


def _clopper_pearson(k: int, n: int, level: float) -> tuple[float, float]:
    a = 1.0 - level
    lo = stats.beta.ppf(a / 2, k, n - k + 1) if k > 0 else 0.0
    hi = stats.beta.ppf(1 - a / 2, k + 1, n - k) if k < n else 1.0
    return float(lo), float(hi)


@dataclass
class SimResult:
    rows: list[SimRow] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def get(self, scheme: str, snr_db: float, mcs: str) -> SimRow:
        for r in self.rows:
            if r.scheme == scheme and r.mcs == mcs and np.isclose(r.snr_db, snr_db):
                return r
        raise KeyError((scheme, snr_db, mcs))

    def select(self, scheme: str | None = None, mcs: str | None = None) -> list[SimRow]:
        return [r for r in self.rows if (scheme is None or r.scheme == scheme)
                and (mcs is None or r.mcs == mcs)]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def throughput_envelope(self) -> dict[tuple[str, float], float]:
        """Best throughput over all MCSs per (scheme, SNR): slow link adaptation."""
        env: dict[tuple[str, float], float] = {}
        for r in self.rows:
            key = (r.scheme, r.snr_db)
            env[key] = max(env.get(key, 0.0), r.throughput)
        return env

    def snr_at_bler(self, scheme: str, mcs: str, target: float) -> float:
        """SNR where BLER crosses ``target``, interpolating log-BLER linearly in dB."""
        rows = sorted(self.select(scheme, mcs), key=lambda r: r.snr_db)
        for a, b in zip(rows, rows[1:]):
            if a.bler >= target >= b.bler and a.bler > 0:
                if b.bler == 0 or a.bler == b.bler:
                    return b.snr_db if a.bler != target else a.snr_db
                t = (np.log(target) - np.log(a.bler)) / (np.log(b.bler) - np.log(a.bler))
                return float(a.snr_db + t * (b.snr_db - a.snr_db))
        raise ValueError(f"BLER of {scheme} {mcs} does not cross {target} in the simulated range")


def draw_channels(spec: ChannelSpec, p: FrameParams, mimo: tuple[int, int], seed) -> list[list[ChannelRealization]]:
    """Independent realizations indexed ``[rx][tx]``.

    With ``on_grid`` the maximum Doppler is first rounded to whole Doppler bins (at
    least one bin when nonzero), then each drawn tap is snapped to the DD lattice.
    """
    n_tx, n_rx = mimo
    prof = spec.channel_profile()
    if prof is None:
        return [[ChannelRealization.identity() for _ in range(n_tx)] for _ in range(n_rx)]
    if spec.on_grid and prof.doppler_max > 0:
        bins = max(1, round(prof.doppler_max / p.doppler_resolution))
        prof = prof.with_doppler(bins * p.doppler_resolution)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_rx):
        row = []
        for _ in range(n_tx):
            ch = realize_profile(prof, int(rng.integers(2**63)))
            row.append(snap_to_grid(ch, p) if spec.on_grid else ch)
        out.append(row)
    return out


def _sfft_axes(a, m_axis, n_axis):
    return ifft(fft(a, axis=n_axis, norm="ortho"), axis=m_axis, norm="ortho")


def _otfs_gram(blocks, p: FrameParams) -> np.ndarray:
    """``H_dd^H H_dd`` from the TF per-symbol blocks, via ``S (H_tf^H H_tf) S^H``."""
    n_rx, n_tx = len(blocks), len(blocks[0])
    M, N = p.M, p.N
    g = np.zeros((n_tx, M, N, n_tx, M, N), dtype=complex)
    for t in range(n_tx):
        for u in range(n_tx):
            c = sum(blocks[r][t].conj().transpose(0, 2, 1) @ blocks[r][u] for r in range(n_rx))
            for n in range(N):
                g[t, :, n, u, :, n] = c[n]
    g = _sfft_axes(g, 1, 2)
    g = np.conj(_sfft_axes(np.conj(g), 4, 5))
    size = n_tx * p.size
    return g.reshape(size, size)


def _apply_blocks_h(blocks_rt, tf):
    # H_tf^H applied to a TF grid: per symbol n, B[n]^H @ tf[:, n]
    return np.einsum("nji,jn->in", blocks_rt.conj(), tf)


class _Receiver:
    """Per-trial genie receiver state for one scheme."""

    def __init__(self, scheme: str, kind: str, channels, p: FrameParams):
        self.scheme, self.kind, self.p = scheme, kind, p
        self.channels = channels
        self.blocks = [[tf_symbol_blocks(ch, p) for ch in row] for row in channels]
        self.n_rx, self.n_tx = len(channels), len(channels[0])
        if scheme == "OTFS":
            self.gram = _otfs_gram(self.blocks, p)
        else:
            M, N = p.M, p.N
            diag = np.stack([[np.diagonal(b, axis1=1, axis2=2) for b in row] for row in self.blocks])
            # (R, T, N, M) -> per bin (M*N, R, T), C-order bin index m*N + n
            self.h_bin = diag.transpose(3, 2, 0, 1).reshape(M * N, self.n_rx, self.n_tx)
            total = np.stack([[np.sum(np.abs(b) ** 2, axis=2) for b in row] for row in self.blocks])
            ici = total.sum(axis=1) - np.sum(np.abs(diag) ** 2, axis=1)  # (R, N, M)
            self.ici = ici.transpose(2, 1, 0).reshape(M * N, self.n_rx)
        self._factors = {}

    def factor(self, noise_variance: float):
        if noise_variance not in self._factors:
            if self.scheme == "OTFS":
                fac = dfe_factor if self.kind == "dd-genie-dfe" else lmmse_factor
                self._factors[noise_variance] = fac(self.gram, noise_variance)
            else:
                w = 1.0 / np.sqrt(noise_variance + self.ici)  # whiten noise plus ICI
                hw = self.h_bin * w[:, :, None]
                gram = np.swapaxes(hw.conj(), 1, 2) @ hw
                fac = dfe_factor if self.kind == "tf-genie-sic" else lmmse_factor
                self._factors[noise_variance] = (*fac(gram, 1.0), w, hw)
        return self._factors[noise_variance]

    def transmit(self, x):
        """Waveform for the (T, M, N) symbol grids."""
        grid = isfft(x, self.p) if self.scheme == "OTFS" else x
        return modulate(grid, self.p)

    def equalize(self, y_tf, x, noise_variance):
        """Unbiased symbol estimates and effective noise variance, each (T, M*N)."""
        p = self.p
        if self.scheme == "OTFS":
            y_dd = sfft(y_tf, p)
            y_back = isfft(y_dd, p)
            matched = np.stack([
                sfft(sum(_apply_blocks_h(self.blocks[r][t], y_back[r]) for r in range(self.n_rx)), p)
                for t in range(self.n_tx)]).reshape(-1)
            fac, sinr = self.factor(noise_variance)
            xv = x.reshape(-1)
            xh = dfe_detect(fac, matched, xv) if self.kind == "dd-genie-dfe" else lmmse_detect(fac, matched)
            xh, sinr = xh.reshape(self.n_tx, -1), sinr.reshape(self.n_tx, -1)
        else:
            fac, sinr, w, hw = self.factor(noise_variance)
            yb = y_tf.reshape(self.n_rx, -1).T * w  # (bins, R)
            matched = np.einsum("brt,br->bt", hw.conj(), yb)
            xb = x.reshape(self.n_tx, -1).T
            xh = dfe_detect(fac, matched, xb) if self.kind == "tf-genie-sic" else lmmse_detect(fac, matched)
            xh, sinr = xh.T, sinr.T
        sinr = np.maximum(sinr, 1e-12)
        bias = sinr / (1.0 + sinr)
        return xh / bias, 1.0 / sinr


def _frame_payload(layout: Layout, n_tx: int, rng):
    info = rng.integers(0, 2, (n_tx, layout.n_blocks, layout.info_bits), dtype=np.int8)
    cw = fec_encode(info, layout.mcs.code)[..., layout.interleaver]
    coded = cw.reshape(n_tx, -1)
    filler = rng.integers(0, 2, (n_tx, layout.layer_bits - coded.shape[1]), dtype=np.int8)
    bits = np.concatenate([coded, filler], axis=1)
    return info, qam_map(bits, layout.mcs.modulation)


def _run_trial(cfg: LinkConfig, layouts: tuple[Layout, ...], trial: int) -> np.ndarray:
    p = cfg.frame
    n_tx, n_rx = cfg.mimo
    counts = np.zeros((len(cfg.schemes), len(cfg.snr_db), len(layouts), 4), dtype=np.int64)
    channels = draw_channels(cfg.channel, p, cfg.mimo, _seed(cfg, trial, _CHANNEL))
    payloads = [_frame_payload(lay, n_tx, np.random.default_rng(_seed(cfg, trial, _DATA, _key(lay.label))))
                for lay in layouts]
    for si, scheme in enumerate(cfg.schemes):
        kind = cfg.otfs_equalizer if scheme == "OTFS" else cfg.ofdm_equalizer
        rx = _Receiver(scheme, kind, channels, p)
        clean = []
        for info, sym in payloads:
            x = sym.reshape(n_tx, p.M, p.N)
            tx = rx.transmit(x)
            out = np.stack([
                sum(apply(SampleStream(tx.samples[t], p.sample_rate), channels[r][t]).samples
                    for t in range(n_tx))
                for r in range(n_rx)])
            clean.append((x, out))
        for ni, snr in enumerate(cfg.snr_db):
            nv = 10.0 ** (-snr / 10.0)
            noise_seed = _seed(cfg, trial, _NOISE, _key(f"{snr:.6g}"))
            for li, (lay, (info, _), (x, out)) in enumerate(zip(layouts, payloads, clean)):
                noisy = add_awgn(SampleStream(out, p.sample_rate), snr, 1.0, noise_seed)
                xh, ev = rx.equalize(demodulate(noisy, p), x, nv)
                _, llr = qam_demap(xh, lay.mcs.modulation, ev)
                coded = llr[:, : lay.n_blocks * lay.coded_len].reshape(n_tx, lay.n_blocks, lay.coded_len)
                deint = np.empty_like(coded)
                deint[..., lay.interleaver] = coded
                dec = fec_decode(deint, lay.mcs.code)
                err = dec != info
                counts[si, ni, li] = (err.sum(), err.size, err.any(axis=-1).sum(), err.shape[0] * err.shape[1])
    return counts


def _run_chunk(args):
    cfg, layouts, trials = args
    total = 0
    for t in trials:
        total = total + _run_trial(cfg, layouts, t)
    return total


def _simulate(cfg: LinkConfig, layouts: tuple[Layout, ...]) -> SimResult:
    trials = range(cfg.trials)
    if cfg.workers == 1:
        counts = _run_chunk((cfg, layouts, trials))
    else:
        chunks = [trials[i::cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            counts = sum(pool.map(_run_chunk, [(cfg, layouts, c) for c in chunks if len(c)]))
    rows = []
    for si, scheme in enumerate(cfg.schemes):
        for ni, snr in enumerate(cfg.snr_db):
            for li, lay in enumerate(layouts):
                be, nb, ke, nk = (int(v) for v in counts[si, ni, li])
                rows.append(SimRow(scheme, float(snr), lay.label, cfg.trials, be, nb, ke, nk,
                                   code_rate(lay.mcs.code), lay.mcs.bits_per_symbol, cfg.master_seed))
    return SimResult(rows)


def run_link(cfg: LinkConfig) -> SimResult:
    """BER/BLER/throughput for every (scheme, SNR, MCS) in ``cfg``."""
    cfg.validate()
    layouts = tuple(Layout.make(m, cfg.frame, cfg.codeblock_bits) for m in cfg.mcs)
    log.info("run_link: %d trials, schemes %s, %d SNRs, %d MCSs",
             cfg.trials, cfg.schemes, len(cfg.snr_db), len(layouts))
    return _simulate(cfg, layouts)


def run_codeblock_study(cfg: LinkConfig, codeblock_sizes) -> SimResult:
    """BLER per codeblock size; rows are labelled ``<mcs>@cb<size>``."""
    cfg.validate()
    if not codeblock_sizes:
        raise ConfigError("codeblock sizes: list must be non-empty")
    layouts = tuple(Layout.make(m, cfg.frame, int(s), f"{m.name}@cb{int(s)}")
                    for m in cfg.mcs for s in codeblock_sizes)
    return _simulate(cfg, layouts)
