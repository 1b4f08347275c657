"""Command-line entry point: ``otfslink {sim,codeblock-study,plan-pilots,estimate-demo}``.

Every subcommand reads a TOML config (see :mod:`otfslink.linksim.config`). Errors
print one ``error: ...`` line to stderr; configuration problems exit with status 2,
other failures with 1.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..channel import add_awgn, apply
from ..estimation import data_mask, estimate_channel, expected_dd_taps, overhead_report, place_pilots, plan_ports
from ..multicarrier import demodulate, modulate
from ..transforms import isfft, sfft
from .config import ConfigError, LinkConfig, load_config
from .sim import draw_channels, run_codeblock_study, run_link

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"arguments: {message}")


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="otfslink", description="OTFS vs OFDM link-level simulator")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="TOML config file")
        sp.add_argument("--workers", type=int, help="override link.workers")
        sp.add_argument("--master-seed", type=int, help="override link.master_seed")
        return sp

    sp = add("sim", "BER/BLER/throughput sweep")
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.add_argument("--plot", help="optional SVG plot path")
    sp = add("codeblock-study", "BLER versus codeblock size")
    sp.add_argument("--sizes", required=True, help="comma-separated codeblock sizes in bits")
    sp.add_argument("--out", required=True, help="CSV output path")
    add("plan-pilots", "pilot/guard layout and overhead")
    add("estimate-demo", "one pilot frame: estimated vs true DD taps")
    return ap


def _load(args) -> LinkConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.master_seed is not None:
        if not 0 <= args.master_seed < 2**64:
            raise ConfigError("--master-seed: must be a 64-bit unsigned integer")
        changes["master_seed"] = args.master_seed
    return cfg.replace(**changes) if changes else cfg


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--sizes: expected comma-separated integers, got {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise ConfigError("--sizes: need at least one positive size")
    return sizes


def _cmd_sim(cfg, args):
    res = run_link(cfg)
    res.to_csv(args.out)
    if args.plot:
        from .plot import plot_result
        plot_result(res, args.plot)


def _cmd_codeblock(cfg, args):
    res = run_codeblock_study(cfg, _parse_sizes(args.sizes))
    res.to_csv(args.out)


def _plan(cfg):
    ps = cfg.pilots
    try:
        plan, report = plan_ports(cfg.frame, ps.delay_spread, ps.doppler_spread,
                                  ps.region_fraction, ps.amplitude)
    except ValueError as exc:
        raise ConfigError(f"pilots: {exc}") from None
    if ps.ports:
        if ps.ports > plan.port_count:
            raise ConfigError(f"pilots.ports: only {plan.port_count} ports fit this grid")
        report = overhead_report(ps.ports, ps.region_fraction,
                                 report.guard_delay_bins, report.guard_doppler_bins)
    return plan, report


def _cmd_plan(cfg, args):
    _, report = _plan(cfg)
    print(report.format())
    print(report.HEADER)
    print(report.row())


def _cmd_estimate(cfg, args):
    p = cfg.frame
    plan, _ = _plan(cfg)
    seed = np.random.SeedSequence(cfg.master_seed)
    s_ch, s_data, s_noise = seed.spawn(3)
    ch = draw_channels(cfg.channel, p, (1, 1), s_ch)[0][0]

    rng = np.random.default_rng(s_data)
    mask = data_mask(plan, p)
    dd = np.zeros(p.shape, complex)
    dd[mask] = (rng.choice([-1, 1], mask.sum()) + 1j * rng.choice([-1, 1], mask.sum())) / np.sqrt(2)
    dd = place_pilots(dd, plan)

    rx = apply(modulate(isfft(dd, p), p), ch)
    nv = cfg.pilots.amplitude**2 * 10.0 ** (-cfg.pilots.snr_db / 10.0)
    rx = add_awgn(rx, cfg.pilots.snr_db, cfg.pilots.amplitude**2, s_noise)
    est = estimate_channel(sfft(demodulate(rx, p), p), plan, 0, noise_variance=nv)
    true = expected_dd_taps(ch, p, plan.pilot_positions[0])

    print(f"pilot port 0 at (k, l) = {plan.pilot_positions[0]}, pilot SNR {cfg.pilots.snr_db:g} dB, "
          f"threshold {est.threshold:.3g}")
    print(f"{'dk':>4} {'dl':>4} {'true':>22} {'estimated':>22} {'rel.err':>8}")
    for key in sorted(set(true) | set(est.taps)):
        t, e = true.get(key, 0j), est.taps.get(key, 0j)
        err = f"{abs(e - t) / abs(t):8.4f}" if t else "     n/a"
        print(f"{key[0]:>4} {key[1]:>4} {t.real:>10.4f}{t.imag:+10.4f}j {e.real:>10.4f}{e.imag:+10.4f}j {err}")


_COMMANDS = {"sim": _cmd_sim, "codeblock-study": _cmd_codeblock,
             "plan-pilots": _cmd_plan, "estimate-demo": _cmd_estimate}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = _load(args)
        _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
