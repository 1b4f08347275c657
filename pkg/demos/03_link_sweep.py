"""Short coded link sweep over an ETU channel, driven from Python.

Loads the bundled ETU config, trims it to a quick run, and prints BLER per
scheme and SNR together with the throughput envelope over all MCSs. The same
sweep is available from the shell as

    otfslink sim --config demos/configs/etu_siso.toml --out etu.csv --plot etu.svg
"""

from pathlib import Path

from otfslink.linksim import load_config, run_link

cfg = load_config(Path(__file__).parent / "configs" / "etu_siso.toml")
cfg = cfg.replace(trials=10, mcs=cfg.mcs[:3])

res = run_link(cfg)
print(f"{'scheme':>6} {'MCS':>16} {'SNR':>5} {'BLER':>6} {'95% CI':>17}")
for r in res:
    lo, hi = r.bler_ci()
    print(f"{r.scheme:>6} {r.mcs:>16} {r.snr_db:5.1f} {r.bler:6.3f} [{lo:6.3f}, {hi:6.3f}]")

print("\nthroughput envelope [bits/channel use]")
for (scheme, snr), tp in sorted(res.throughput_envelope().items()):
    print(f"{scheme:>6} {snr:5.1f} dB  {tp:.3f}")
