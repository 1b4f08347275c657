"""SVG plots of simulation results (needs the optional ``matplotlib`` dependency)."""

from __future__ import annotations

from .sim import SimResult

__all__ = ["plot_result"]


def plot_result(result: SimResult, path) -> None:
    """BLER per (scheme, MCS) and the max-over-MCS throughput envelope versus SNR."""
    try:
        import matplotlib
    except ImportError:
        raise ImportError("plotting needs matplotlib (pip install matplotlib)") from None
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "otfslink"  # stable element ids
    import matplotlib.pyplot as plt

    fig, (ax_b, ax_t) = plt.subplots(1, 2, figsize=(10, 4))
    styles = {"OTFS": "-", "OFDM": "--"}
    for scheme in dict.fromkeys(r.scheme for r in result):
        for mcs in dict.fromkeys(r.mcs for r in result.select(scheme)):
            rows = sorted(result.select(scheme, mcs), key=lambda r: r.snr_db)
            ax_b.semilogy([r.snr_db for r in rows], [max(r.bler, 1e-4) for r in rows],
                          styles.get(scheme, "-"), marker="o", label=f"{scheme} {mcs}")
        env = sorted((snr, tp) for (s, snr), tp in result.throughput_envelope().items() if s == scheme)
        ax_t.plot(*zip(*env), styles.get(scheme, "-"), marker="o", label=scheme)
    ax_b.set(xlabel="SNR [dB]", ylabel="BLER", ylim=(1e-4, 1.1))
    ax_t.set(xlabel="SNR [dB]", ylabel="throughput [bits/channel use/stream]")
    for ax in (ax_b, ax_t):
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
