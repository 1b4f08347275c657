"""Monte Carlo link-level harness: QAM, FEC, frame assembly, sweeps and CLI."""

from .config import DEFAULT_MCS_SET, MCS, ChannelSpec, ConfigError, LinkConfig, PilotSpec, load_config, parse_config
from .fec import CODES, code_rate, coded_length, fec_decode, fec_encode, max_info_bits
from .qam import BITS_PER_SYMBOL, constellation, qam_demap, qam_map
from .sim import CSV_HEADER, Layout, SimResult, SimRow, draw_channels, run_codeblock_study, run_link

__all__ = [
    "BITS_PER_SYMBOL", "CODES", "CSV_HEADER", "DEFAULT_MCS_SET", "MCS", "ChannelSpec", "ConfigError",
    "Layout", "LinkConfig", "PilotSpec", "SimResult", "SimRow", "code_rate", "coded_length",
    "constellation", "draw_channels", "fec_decode", "fec_encode", "load_config", "max_info_bits",
    "parse_config", "qam_demap", "qam_map", "run_codeblock_study", "run_link",
]
