"""Simulation configuration: dataclasses plus a strict TOML loader.

A config file has four tables; unknown keys anywhere are rejected::

    [frame]
    M = 64                 # subcarriers / delay bins
    N = 16                 # symbols / Doppler bins
    delta_f = 15e3         # Hz
    cp_len = 8             # samples

    [channel]
    profile = "ETU"        # ETU, EVA, single-tap, two-tap, identity or custom
    doppler_max = 300.0    # Hz
    doppler_model = "jakes-angle"
    on_grid = true         # snap taps to the DD lattice (Doppler >= 1 bin if nonzero)
    # tap_delays = [0.0, 1e-6]   # seconds, profile = "custom" only
    # tap_powers_db = [0.0, -3.0]

    [link]
    schemes = ["OTFS", "OFDM"]
    mcs = ["16QAM:conv-r12"]       # or modulation = "16QAM" plus code = "conv-r12"
                                   # codes: none, conv-r12, conv-r13, turbo-r12, turbo-r13
    codeblock_bits = 0             # 0: one codeblock filling the layer
    snr_db = [10.0, 14.0]
    mimo = [1, 1]                  # [transmit, receive]
    otfs_equalizer = "dd-genie-dfe"
    ofdm_equalizer = "tf-genie-sic"
    trials = 200
    master_seed = 1
    workers = 1

    [pilots]
    region_fraction = 0.07
    delay_spread = 5e-6
    doppler_spread = 100.0
    amplitude = 1.0
    snr_db = 40.0          # pilot SNR for estimate-demo
    ports = 0              # report overhead for this many ports (0: as many as fit)
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace

from ..channel import PROFILES, ChannelProfile, get_profile
from ..equalization import EQUALIZER_KINDS
from ..transforms import FrameParams
from .fec import CODES, code_rate, coded_length, max_info_bits
from .qam import BITS_PER_SYMBOL

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "MCS",
    "DEFAULT_MCS_SET",
    "ChannelSpec",
    "PilotSpec",
    "LinkConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; the message names the offending key."""


@dataclass(frozen=True)
class MCS:
    modulation: str
    code: str

    def __post_init__(self):
        if self.modulation not in BITS_PER_SYMBOL:
            raise ConfigError(f"link.mcs: unknown modulation {self.modulation!r}")
        if self.code not in CODES:
            raise ConfigError(f"link.mcs: unknown code {self.code!r}")

    @classmethod
    def parse(cls, text: str) -> "MCS":
        mod, sep, code = text.partition(":")
        if not sep:
            raise ConfigError(f"link.mcs: expected 'MODULATION:CODE', got {text!r}")
        return cls(mod.strip(), code.strip())

    @property
    def name(self) -> str:
        return f"{self.modulation}:{self.code}"

    @property
    def bits_per_symbol(self) -> int:
        return BITS_PER_SYMBOL[self.modulation]

    @property
    def rate(self) -> float:
        return code_rate(self.code)


DEFAULT_MCS_SET = tuple(MCS.parse(s) for s in (
    "QPSK:conv-r13", "QPSK:conv-r12", "16QAM:conv-r13", "16QAM:conv-r12", "64QAM:conv-r12"))


@dataclass(frozen=True)
class ChannelSpec:
    profile: str = "ETU"
    doppler_max: float | None = None
    doppler_model: str = "jakes-angle"
    on_grid: bool = True
    tap_delays: tuple[float, ...] = ()
    tap_powers_db: tuple[float, ...] = ()

    def channel_profile(self) -> ChannelProfile | None:
        """The profile to draw from, or ``None`` for the identity channel."""
        if self.profile == "identity":
            return None
        if self.profile == "custom":
            return ChannelProfile(self.tap_delays, self.tap_powers_db,
                                  self.doppler_max or 0.0, self.doppler_model, "custom")
        return get_profile(self.profile, self.doppler_max, self.doppler_model)


@dataclass(frozen=True)
class PilotSpec:
    region_fraction: float = 0.07
    delay_spread: float = 5e-6
    doppler_spread: float = 100.0
    amplitude: float = 1.0
    snr_db: float = 40.0
    ports: int = 0  # 0: as many as fit


@dataclass(frozen=True)
class LinkConfig:
    frame: FrameParams = field(default_factory=lambda: FrameParams(64, 16, 15e3, 8))
    schemes: tuple[str, ...] = ("OTFS", "OFDM")
    mcs: tuple[MCS, ...] = (MCS("16QAM", "conv-r12"),)
    codeblock_bits: int = 0
    channel: ChannelSpec = ChannelSpec()
    snr_db: tuple[float, ...] = (10.0,)
    mimo: tuple[int, int] = (1, 1)
    otfs_equalizer: str = "dd-genie-dfe"
    ofdm_equalizer: str = "tf-genie-sic"
    trials: int = 100
    master_seed: int = 0
    workers: int = 1
    pilots: PilotSpec = PilotSpec()

    def __post_init__(self):
        self.validate()

    @property
    def n_tx(self) -> int:
        return self.mimo[0]

    @property
    def n_rx(self) -> int:
        return self.mimo[1]

    @property
    def layer_bits(self) -> dict[str, int]:
        return {m.name: self.frame.size * m.bits_per_symbol for m in self.mcs}

    def replace(self, **changes) -> "LinkConfig":
        return replace(self, **changes)

    def validate(self) -> None:
        bad = [s for s in self.schemes if s not in ("OTFS", "OFDM")]
        if not self.schemes or bad:
            raise ConfigError(f"link.schemes: expected OTFS and/or OFDM, got {list(self.schemes)}")
        if not self.mcs:
            raise ConfigError("link.mcs: at least one MCS is required")
        if self.trials < 1:
            raise ConfigError("link.trials: must be >= 1")
        if self.workers < 1:
            raise ConfigError("link.workers: must be >= 1")
        if not self.snr_db:
            raise ConfigError("link.snr_db: list must be non-empty")
        if len(self.mimo) != 2 or min(self.mimo) < 1:
            raise ConfigError("link.mimo: expected [transmit, receive] with both >= 1")
        if self.otfs_equalizer not in ("dd-lmmse", "dd-genie-dfe"):
            raise ConfigError(f"link.otfs_equalizer: {self.otfs_equalizer!r} is not one of "
                              "dd-lmmse, dd-genie-dfe")
        if self.ofdm_equalizer not in ("tf-single-tap", "tf-genie-sic"):
            raise ConfigError(f"link.ofdm_equalizer: {self.ofdm_equalizer!r} is not one of "
                              "tf-single-tap, tf-genie-sic")
        if self.codeblock_bits < 0:
            raise ConfigError("link.codeblock_bits: must be >= 0")
        for m in self.mcs:
            cap = self.frame.size * m.bits_per_symbol
            if self.codeblock_bits and coded_length(self.codeblock_bits, m.code) > cap:
                raise ConfigError(f"link.codeblock_bits: {self.codeblock_bits} bits do not fit "
                                  f"the {cap}-bit layer capacity for {m.name}")
            if max_info_bits(cap, m.code) < 1:
                raise ConfigError(f"link.mcs: frame too small for {m.name}")
        prof = self.channel.channel_profile()
        if prof is not None:
            d = round(max(prof.tap_delays) * self.frame.sample_rate)
            if d > self.frame.cp_len:
                raise ConfigError(f"frame.cp_len: {self.frame.cp_len} samples is shorter than the "
                                  f"{d}-sample maximum channel delay")
        if not 0 < self.pilots.region_fraction <= 1:
            raise ConfigError("pilots.region_fraction: must be in (0, 1]")
        if self.pilots.ports < 0:
            raise ConfigError("pilots.ports: must be >= 0")
        if not self.pilots.amplitude > 0:
            raise ConfigError("pilots.amplitude: must be positive")


_SCHEMA = {
    "frame": {"M", "N", "delta_f", "cp_len"},
    "channel": {"profile", "doppler_max", "doppler_model", "on_grid", "tap_delays", "tap_powers_db"},
    "link": {"schemes", "scheme", "mcs", "modulation", "code", "codeblock_bits", "snr_db", "mimo",
             "otfs_equalizer", "ofdm_equalizer", "trials", "master_seed", "workers"},
    "pilots": {"region_fraction", "delay_spread", "doppler_spread", "amplitude", "snr_db", "ports"},
}


def _get(table, section, key, kind, default):
    if key not in table:
        return default
    val = table[key]
    try:
        if kind is float and isinstance(val, bool):
            raise TypeError
        if kind is int and (isinstance(val, bool) or (isinstance(val, float) and not val.is_integer())):
            raise TypeError
        if kind is bool and not isinstance(val, bool):
            raise TypeError
        if kind is str and not isinstance(val, str):
            raise TypeError
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}: expected {kind.__name__}, got {val!r}") from None


def _get_list(table, section, key, kind, default):
    if key not in table:
        return default
    val = table[key]
    if not isinstance(val, list):
        val = [val]
    return tuple(_get({key: v}, section, key, kind, None) for v in val)


def parse_config(doc: dict) -> LinkConfig:
    """Build a :class:`LinkConfig` from a parsed TOML document."""
    for section, table in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown section (expected one of {sorted(_SCHEMA)})")
        if not isinstance(table, dict):
            raise ConfigError(f"{section}: expected a table")
        for key in table:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
    fr = doc.get("frame", {})
    ch = doc.get("channel", {})
    ln = doc.get("link", {})
    pl = doc.get("pilots", {})
    defaults = LinkConfig.__dataclass_fields__
    try:
        frame = FrameParams(_get(fr, "frame", "M", int, 64), _get(fr, "frame", "N", int, 16),
                            _get(fr, "frame", "delta_f", float, 15e3),
                            _get(fr, "frame", "cp_len", int, 8))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"frame: {exc}") from None

    profile = _get(ch, "channel", "profile", str, "ETU")
    if profile not in PROFILES and profile not in ("identity", "custom"):
        raise ConfigError(f"channel.profile: unknown profile {profile!r}")
    if (profile == "custom") != ("tap_delays" in ch):
        raise ConfigError("channel.tap_delays: required for (and only for) profile = 'custom'")
    try:
        channel = ChannelSpec(
            profile,
            _get(ch, "channel", "doppler_max", float, None),
            _get(ch, "channel", "doppler_model", str, "jakes-angle"),
            _get(ch, "channel", "on_grid", bool, True),
            _get_list(ch, "channel", "tap_delays", float, ()),
            _get_list(ch, "channel", "tap_powers_db", float, ()),
        )
        channel.channel_profile()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"channel: {exc}") from None

    if "scheme" in ln and "schemes" in ln:
        raise ConfigError("link.scheme: give either scheme or schemes, not both")
    schemes = _get_list(ln, "link", "schemes", str, None) or \
        _get_list(ln, "link", "scheme", str, defaults["schemes"].default)
    schemes = tuple(s.upper() for s in schemes)
    if "mcs" in ln:
        if "modulation" in ln or "code" in ln:
            raise ConfigError("link.mcs: give either mcs or modulation/code, not both")
        mcs = tuple(MCS.parse(s) for s in _get_list(ln, "link", "mcs", str, ()))
    elif "modulation" in ln or "code" in ln:
        mcs = (MCS(_get(ln, "link", "modulation", str, "16QAM"),
                   _get(ln, "link", "code", str, "conv-r12")),)
    else:
        mcs = DEFAULT_MCS_SET
    mimo = _get_list(ln, "link", "mimo", int, (1, 1))

    pilots = PilotSpec(*(
        _get(pl, "pilots", k, float, getattr(PilotSpec, k))
        for k in ("region_fraction", "delay_spread", "doppler_spread", "amplitude", "snr_db")),
        _get(pl, "pilots", "ports", int, 0))

    return LinkConfig(
        frame=frame,
        schemes=schemes,
        mcs=mcs,
        codeblock_bits=_get(ln, "link", "codeblock_bits", int, 0),
        channel=channel,
        snr_db=_get_list(ln, "link", "snr_db", float, defaults["snr_db"].default),
        mimo=tuple(mimo),
        otfs_equalizer=_get(ln, "link", "otfs_equalizer", str, "dd-genie-dfe"),
        ofdm_equalizer=_get(ln, "link", "ofdm_equalizer", str, "tf-genie-sic"),
        trials=_get(ln, "link", "trials", int, 100),
        master_seed=_get(ln, "link", "master_seed", int, 0),
        workers=_get(ln, "link", "workers", int, 1),
        pilots=pilots,
    )


def load_config(path) -> LinkConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config: malformed TOML: {exc}") from None
    return parse_config(doc)
