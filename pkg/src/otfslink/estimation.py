"""Delay-Doppler impulse pilots: placement, channel estimation and antenna-port packing.

Each antenna port is one impulse in a reserved rectangular region of the DD grid. A
port owns the guard box ``[l, l + L_tau] x [k - L_nu, k + L_nu]`` (delay x Doppler)
around its pilot: after the channel's 2D circular convolution the pilot's energy
lands inside that box as long as the channel's delay and Doppler spreads fit. Boxes
of different ports must not intersect and must not wrap around the grid edges.

Positions are given as ``(k, l)`` = (Doppler, delay) pairs; grids are indexed
``grid[l, k]`` like everywhere else in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .transforms import FrameParams

__all__ = [
    "DDRegion",
    "PilotPlan",
    "DDChannelEstimate",
    "PilotReport",
    "place_pilots",
    "estimate_channel",
    "expected_dd_taps",
    "data_mask",
    "guard_sizes",
    "plan_ports",
]


@dataclass(frozen=True)
class DDRegion:
    """Half-open rectangle of Doppler rows ``[k0, k0+rows)`` and delay columns ``[l0, l0+cols)``."""

    k0: int
    rows: int
    l0: int
    cols: int

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def mask(self, p: FrameParams) -> np.ndarray:
        m = np.zeros(p.shape, dtype=bool)
        m[self.l0:self.l0 + self.cols, self.k0:self.k0 + self.rows] = True
        return m

    def contains(self, k: int, l: int) -> bool:
        return self.k0 <= k < self.k0 + self.rows and self.l0 <= l < self.l0 + self.cols


@dataclass(frozen=True)
class PilotPlan:
    pilot_positions: tuple[tuple[int, int], ...]
    guard_delay_bins: int
    guard_doppler_bins: int
    pilot_amplitude: float
    region: DDRegion

    def __post_init__(self):
        object.__setattr__(self, "pilot_positions",
                           tuple((int(k), int(l)) for k, l in self.pilot_positions))
        if self.guard_delay_bins < 0 or self.guard_doppler_bins < 0:
            raise ValueError("guard sizes must be non-negative")
        if not self.pilot_amplitude > 0:
            raise ValueError("pilot_amplitude must be positive")
        boxes = [self.guard_box(i) for i in range(len(self.pilot_positions))]
        for i, (k, l) in enumerate(self.pilot_positions):
            k_lo, k_hi, l_lo, l_hi = boxes[i]
            if not (self.region.contains(k_lo, l_lo) and self.region.contains(k_hi, l_hi)):
                raise ValueError(f"guard box of port {i} at (k={k}, l={l}) leaves the pilot region")
            for j in range(i):
                if _overlap(boxes[i], boxes[j]):
                    raise ValueError(f"guard boxes of ports {j} and {i} overlap")

    @property
    def port_count(self) -> int:
        return len(self.pilot_positions)

    def guard_box(self, port: int) -> tuple[int, int, int, int]:
        """Inclusive bounds ``(k_lo, k_hi, l_lo, l_hi)`` of a port's guard box."""
        k, l = self.pilot_positions[port]
        return (k - self.guard_doppler_bins, k + self.guard_doppler_bins,
                l, l + self.guard_delay_bins)

    def validate_for(self, p: FrameParams) -> None:
        r = self.region
        if r.k0 < 0 or r.l0 < 0 or r.k0 + r.rows > p.N or r.l0 + r.cols > p.M:
            raise ValueError(f"pilot region {r} does not fit a {p.M}x{p.N} grid")


def _overlap(a, b) -> bool:
    return not (a[1] < b[0] or b[1] < a[0] or a[3] < b[2] or b[3] < a[2])


@dataclass
class DDChannelEstimate:
    """Estimated DD taps keyed by ``(doppler_shift, delay_shift)`` in bins."""

    taps: dict[tuple[int, int], complex] = field(default_factory=dict)
    threshold: float = 0.0

    def dominant(self) -> tuple[tuple[int, int], complex]:
        return max(self.taps.items(), key=lambda kv: abs(kv[1]))


def place_pilots(data, plan: PilotPlan) -> np.ndarray:
    """Write the pilot impulses into a DD grid whose pilot region is empty."""
    data = np.asarray(data, dtype=complex)
    M, N = data.shape[-2:]
    plan.validate_for(FrameParams(M, N))
    region = plan.region.mask(FrameParams(M, N))
    if np.any(data[..., region] != 0):
        raise ValueError("data grid has nonzero entries inside the pilot region")
    out = data.copy()
    for k, l in plan.pilot_positions:
        out[..., l, k] = plan.pilot_amplitude
    return out


def data_mask(plan: PilotPlan, p: FrameParams) -> np.ndarray:
    """Positions where data can go without its channel spread reaching any guard box.

    A symbol at ``(k, l)`` spreads to delays ``l..l+L_tau`` and Dopplers
    ``k-L_nu..k+L_nu`` (circularly); that footprint must miss every guard box.
    """
    plan.validate_for(p)
    hit = np.zeros(p.shape, dtype=bool)
    Lt, Ln = plan.guard_delay_bins, plan.guard_doppler_bins
    for port in range(plan.port_count):
        k_lo, k_hi, l_lo, l_hi = plan.guard_box(port)
        ks = np.arange(k_lo - Ln, k_hi + Ln + 1) % p.N
        ls = np.arange(l_lo - Lt, l_hi + 1) % p.M
        hit[np.ix_(ls, ks)] = True
    return ~hit & ~plan.region.mask(p)


def _noise_std(received, plan: PilotPlan, p: FrameParams) -> float:
    # bins of the reserved region that no guard box covers carry only noise
    quiet = plan.region.mask(p)
    for port in range(plan.port_count):
        k_lo, k_hi, l_lo, l_hi = plan.guard_box(port)
        quiet[l_lo:l_hi + 1, k_lo:k_hi + 1] = False
    if quiet.any():
        return float(np.sqrt(np.mean(np.abs(received[quiet]) ** 2)))
    # fall back to a median estimate over the boxes, which are mostly empty for sparse channels
    vals = np.concatenate([
        np.abs(received[l_lo:l_hi + 1, k_lo:k_hi + 1]).ravel() ** 2
        for k_lo, k_hi, l_lo, l_hi in map(plan.guard_box, range(plan.port_count))])
    return float(np.sqrt(np.median(vals) / np.log(2)))


def estimate_channel(received, plan: PilotPlan, port: int, threshold: float | None = None,
                     noise_variance: float | None = None) -> DDChannelEstimate:
    """Read the port's guard box and scale by the pilot amplitude.

    Bins whose estimated gain is below ``threshold`` are dropped. By default the
    threshold is three times the per-bin noise standard deviation (given via
    ``noise_variance`` or estimated from unused bins of the pilot region).
    """
    if not 0 <= port < plan.port_count:
        raise ValueError(f"port {port} out of range for {plan.port_count} ports")
    received = np.asarray(received, dtype=complex)
    p = FrameParams(*received.shape[-2:])
    plan.validate_for(p)
    if threshold is None:
        sigma = np.sqrt(noise_variance) if noise_variance is not None \
            else _noise_std(received, plan, p)
        threshold = 3.0 * sigma / plan.pilot_amplitude
    k, l = plan.pilot_positions[port]
    taps = {}
    for dk in range(-plan.guard_doppler_bins, plan.guard_doppler_bins + 1):
        for dl in range(plan.guard_delay_bins + 1):
            g = complex(received[l + dl, k + dk]) / plan.pilot_amplitude
            if abs(g) >= threshold and g != 0:
                taps[(dk, dl)] = g
    return DDChannelEstimate(taps, float(threshold))


def expected_dd_taps(ch: ChannelRealization, p: FrameParams,
                     pilot: tuple[int, int]) -> dict[tuple[int, int], complex]:
    """Noiseless DD-domain tap values an on-grid channel leaves around ``pilot``.

    With rectangular CP-OFDM pulses, a path with Doppler ``nu`` reaches the pilot's
    box scaled by ``exp(2j*pi*nu*(cp_len + l_pilot)/fs)`` (assuming the pilot's delay
    plus the path delay stays below ``M``). Taps landing on the same bin add up.
    """
    _, lp = pilot
    out: dict[tuple[int, int], complex] = {}
    for tap in ch.taps:
        dl = int(round(tap.delay * p.sample_rate))
        dk = int(round(tap.doppler / p.doppler_resolution))
        g = tap.gain * np.exp(2j * np.pi * tap.doppler * (p.cp_len + lp) / p.sample_rate)
        out[(dk, dl)] = out.get((dk, dl), 0) + g
    return out


def guard_sizes(p: FrameParams, delay_spread: float, doppler_spread: float) -> tuple[int, int]:
    """``(L_tau, L_nu)``: delay and Doppler spreads expressed in whole bins, rounded up."""
    if delay_spread < 0 or doppler_spread < 0:
        raise ValueError("spreads must be non-negative")
    # tolerance keeps exact multiples of a bin from rounding up through float error
    Lt = math.ceil(delay_spread * p.M * p.delta_f - 1e-9)
    Ln = math.ceil(doppler_spread * p.N * p.symbol_duration - 1e-9)
    return max(Lt, 0), max(Ln, 0)


@dataclass(frozen=True)
class PilotReport:
    port_count: int
    guard_delay_bins: int
    guard_doppler_bins: int
    overhead_total: float
    overhead_per_port: float

    HEADER = "port_count,L_tau,L_nu,overhead_total,overhead_per_port"

    def row(self) -> str:
        return (f"{self.port_count},{self.guard_delay_bins},{self.guard_doppler_bins},"
                f"{self.overhead_total:.6g},{self.overhead_per_port:.6g}")

    def format(self) -> str:
        return "\n".join([
            f"antenna ports        : {self.port_count}",
            f"guard (delay bins)   : {self.guard_delay_bins}",
            f"guard (Doppler bins) : +/-{self.guard_doppler_bins}",
            f"overhead total       : {self.overhead_total * 100:.2f}%",
            f"overhead per port    : {self.overhead_per_port * 100:.2f}% "
            f"({self.overhead_per_port * 100:.3g}%)",
        ])


def overhead_report(port_count: int, region_fraction: float, Lt: int = 0, Ln: int = 0) -> PilotReport:
    return PilotReport(port_count, Lt, Ln, region_fraction, region_fraction / port_count)


def plan_ports(p: FrameParams, delay_spread: float, doppler_spread: float,
               region_fraction: float, pilot_amplitude: float = 1.0):
    """Pack as many ports as fit into a reserved region of ``region_fraction`` of the grid.

    Ports sit on a rectangular lattice with pitch ``2*L_nu + 1`` Doppler rows by
    ``L_tau + 1`` delay columns. The region is the rectangle (anchored at the grid
    origin, at most ``floor(region_fraction*M*N)`` bins) that holds the most ports;
    ties go to the smaller area. Returns ``(plan, report)``.
    """
    if not 0 < region_fraction <= 1:
        raise ValueError("region_fraction must be in (0, 1]")
    Lt, Ln = guard_sizes(p, delay_spread, doppler_spread)
    pr, pc = 2 * Ln + 1, Lt + 1
    budget = math.floor(region_fraction * p.size + 1e-9)
    best = (0, 0, 0, 0)  # ports, -area, rows, cols
    for rows in range(1, p.N + 1):
        cols = min(p.M, budget // rows)
        if cols == 0:
            break
        # trim to a whole number of lattice cells
        n_r, n_c = rows // pr, cols // pc
        cand = (n_r * n_c, -(n_r * pr * n_c * pc), n_r * pr, n_c * pc)
        if cand[0] and cand[:2] > best[:2]:
            best = cand
    ports, _, rows, cols = best
    if ports == 0:
        raise ValueError(f"region too small: a {pr}x{pc} guard box does not fit in "
                         f"{budget} bins of a {p.M}x{p.N} grid")
    region = DDRegion(0, rows, 0, cols)
    pos = tuple((Ln + i * pr, j * pc) for i in range(rows // pr) for j in range(cols // pc))
    plan = PilotPlan(pos, Lt, Ln, pilot_amplitude, region)
    return plan, overhead_report(ports, region_fraction, Lt, Ln)
