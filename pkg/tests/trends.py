"""Trend studies shared by the acceptance suite and the scripts that pinned its constants."""

from __future__ import annotations

import numpy as np

from otfslink.linksim import MCS, ChannelSpec, LinkConfig, run_codeblock_study, run_link
from otfslink.transforms import FrameParams

TARGET_BLER = 0.1

# 16QAM at rate 1/2 with a turbo code, on a grid wide enough (1.92 MHz) that a small
# codeblock sees only a slice of the ETU frequency selectivity; true 300 Hz Doppler.
CODEBLOCK_CFG = LinkConfig(
    frame=FrameParams(128, 8, 15e3, 16),
    channel=ChannelSpec("ETU", 300.0, on_grid=False),
    mcs=(MCS("16QAM", "turbo-r12"),),
    snr_db=(12.0,),
    trials=2000,
    master_seed=5,
)
CODEBLOCK_SIZES = (500, 1000, 2000)


def codeblock_study(trials: int = CODEBLOCK_CFG.trials):
    cfg = CODEBLOCK_CFG.replace(trials=trials)
    res = run_codeblock_study(cfg, CODEBLOCK_SIZES)
    mcs = cfg.mcs[0].name
    out = {}
    for scheme in cfg.schemes:
        out[scheme] = {s: res.get(scheme, cfg.snr_db[0], f"{mcs}@cb{s}") for s in CODEBLOCK_SIZES}
    return out


def overlap(a, b) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def etu_config(mimo: tuple[int, int]) -> LinkConfig:
    frame = FrameParams(64, 16, 15e3, 8) if mimo == (1, 1) else FrameParams(32, 16, 15e3, 8)
    return LinkConfig(frame=frame, channel=ChannelSpec("ETU", 300.0), mcs=(MCS("16QAM", "conv-r12"),),
                      mimo=mimo, snr_db=(6.0, 8.0, 10.0, 12.0, 14.0, 16.0), trials=300, master_seed=11)


def ofdm_target_gap(mimo: tuple[int, int], sweep_trials: int = 300, check_trials: int = 1000):
    """Find the OFDM 10%-BLER SNR, then compare both schemes there.

    Returns ``(snr_ofdm, snr_otfs, check_result)`` where the SNRs are interpolated
    10%-BLER points of the sweep and ``check_result`` is a fresh run (different seed)
    at ``snr_ofdm`` rounded to 0.1 dB.
    """
    cfg = etu_config(mimo).replace(trials=sweep_trials)
    sweep = run_link(cfg)
    mcs = cfg.mcs[0].name
    snr_ofdm = sweep.snr_at_bler("OFDM", mcs, TARGET_BLER)
    snr_otfs = sweep.snr_at_bler("OTFS", mcs, TARGET_BLER)
    check = run_link(cfg.replace(snr_db=(round(snr_ofdm, 1),), trials=check_trials,
                                 master_seed=cfg.master_seed + 1))
    return snr_ofdm, snr_otfs, check


def etu14_regression(trials: int = 2000):
    cfg = LinkConfig(channel=ChannelSpec("ETU", 300.0), mcs=(MCS("16QAM", "conv-r12"),),
                     snr_db=(14.0,), trials=trials, master_seed=3)
    res = run_link(cfg)
    return res.get("OTFS", 14.0, "16QAM:conv-r12"), res.get("OFDM", 14.0, "16QAM:conv-r12")


def fmt(row) -> str:
    lo, hi = row.bler_ci()
    return f"{row.scheme} {row.mcs} @ {row.snr_db:g} dB: bler {row.bler:.4g} [{lo:.4g}, {hi:.4g}] " \
           f"({row.block_errors}/{row.total_blocks})"


__all__ = ["CODEBLOCK_CFG", "CODEBLOCK_SIZES", "TARGET_BLER", "codeblock_study", "etu14_regression",
           "etu_config", "fmt", "ofdm_target_gap", "overlap", "np"]
