import subprocess
import sys

import numpy as np
import pytest
from scipy.special import erfc

from otfslink.linksim import (CSV_HEADER, DEFAULT_MCS_SET, MCS, ChannelSpec, ConfigError, Layout, LinkConfig,
                              SimResult, SimRow, parse_config, run_codeblock_study, run_link)
from otfslink.linksim import sim
from otfslink.linksim.cli import main
from otfslink.linksim.config import load_config
from otfslink.channel import tf_symbol_blocks
from otfslink.equalization import build_effective_matrix, lmmse, per_symbol_sinr
from otfslink.transforms import FrameParams, isfft

import trends

SMALL = FrameParams(16, 8, 15e3, 8)
# block errors out of 2000 at 14 dB, ETU 300 Hz, 16QAM conv-r12, seed 3
ETU14_BLOCK_ERRORS = {"OTFS": 66, "OFDM": 155}

CONFIG = """
[frame]
M = 16
N = 8
cp_len = 8

[channel]
profile = "ETU"
doppler_max = 300.0

[link]
mcs = ["QPSK:conv-r12", "16QAM:conv-r12"]
snr_db = [6.0, 12.0]
trials = 4
master_seed = 21

[pilots]
region_fraction = 0.25
delay_spread = 5e-6
doppler_spread = 300.0
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(CONFIG)
    return path


# --- configuration -----------------------------------------------------------

def test_defaults():
    cfg = parse_config({})
    assert cfg.frame == FrameParams(64, 16, 15e3, 8)
    assert cfg.mcs == DEFAULT_MCS_SET
    assert {m.name for m in DEFAULT_MCS_SET} == {"QPSK:conv-r12", "QPSK:conv-r13", "16QAM:conv-r12",
                                                  "16QAM:conv-r13", "64QAM:conv-r12"}
    assert cfg.schemes == ("OTFS", "OFDM")


def test_load_config(cfg_file):
    cfg = load_config(cfg_file)
    assert cfg.frame == FrameParams(16, 8, 15e3, 8)
    assert cfg.mcs == (MCS("QPSK", "conv-r12"), MCS("16QAM", "conv-r12"))
    assert cfg.snr_db == (6.0, 12.0)
    assert cfg.channel.channel_profile().doppler_max == 300.0


@pytest.mark.parametrize("doc,key", [
    ({"link": {"trails": 3}}, "link.trails"),
    ({"radio": {}}, "radio"),
    ({"link": {"trials": 0}}, "link.trials"),
    ({"link": {"trials": "many"}}, "link.trials"),
    ({"link": {"snr_db": []}}, "link.snr_db"),
    ({"link": {"mcs": ["16QAM:turbo-r99"]}}, "link.mcs"),
    ({"link": {"mcs": ["32QAM:conv-r12"]}}, "link.mcs"),
    ({"link": {"schemes": ["CDMA"]}}, "link.schemes"),
    ({"link": {"mimo": [0, 1]}}, "link.mimo"),
    ({"link": {"codeblock_bits": 5000}}, "link.codeblock_bits"),
    ({"link": {"otfs_equalizer": "zf"}}, "link.otfs_equalizer"),
    ({"frame": {"M": 0}}, "frame"),
    ({"frame": {"cp_len": 2}}, "frame.cp_len"),
    ({"channel": {"profile": "XYZ"}}, "channel.profile"),
    ({"channel": {"profile": "custom"}}, "channel.tap_delays"),
    ({"pilots": {"region_fraction": 1.5}}, "pilots.region_fraction"),
])
def test_config_errors_name_the_key(doc, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(doc)


def test_custom_profile():
    cfg = parse_config({"channel": {"profile": "custom", "tap_delays": [0.0, 1e-6], "tap_powers_db": [0.0, -3.0],
                                    "doppler_max": 10.0}})
    prof = cfg.channel.channel_profile()
    assert prof.tap_delays == (0.0, 1e-6) and prof.doppler_max == 10.0


def test_mcs_parse():
    m = MCS.parse("64QAM:conv-r12")
    assert (m.bits_per_symbol, m.rate, m.name) == (6, 0.5, "64QAM:conv-r12")
    with pytest.raises(ConfigError):
        MCS.parse("QPSK")


# --- results -------------------------------------------------------------------

def row(**kw):
    base = dict(scheme="OTFS", snr_db=10.0, mcs="QPSK:conv-r12", trials=10, bit_errors=5, total_bits=1000,
                block_errors=2, total_blocks=10, rate=0.5, bits_per_symbol=2, seed=1)
    base.update(kw)
    return SimRow(**base)


def test_row_metrics_and_csv():
    r = row()
    assert (r.ber, r.bler) == (0.005, 0.2)
    assert r.throughput == pytest.approx(0.8)
    lo, hi = r.bler_ci()
    assert lo < 0.2 < hi
    assert row(block_errors=0).bler_ci()[0] == 0.0
    assert row(block_errors=10).bler_ci()[1] == 1.0
    text = SimResult([r]).to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert text.splitlines()[1] == "OTFS,10,QPSK:conv-r12,10,5,0.005,2,0.2,0.8,1"
    assert ",".join(CSV_HEADER) == "scheme,snr_db,mcs,trials,bit_errors,ber,block_errors,bler,throughput,seed"


def test_clopper_pearson_known_value():
    # 95% interval for 2/10 successes
    lo, hi = row().bler_ci()
    assert lo == pytest.approx(0.0252, abs=1e-4) and hi == pytest.approx(0.5561, abs=1e-4)


def test_envelope_and_interpolation():
    res = SimResult([row(snr_db=s, block_errors=b, mcs=m, rate=0.5, bits_per_symbol=q)
                     for s, b, m, q in [(0, 8, "a", 2), (5, 1, "a", 2), (0, 10, "b", 4), (5, 3, "b", 4)]])
    env = res.throughput_envelope()
    assert env[("OTFS", 0.0)] == pytest.approx(0.2)
    assert env[("OTFS", 5.0)] == pytest.approx(1.4)
    snr = res.snr_at_bler("OTFS", "a", 0.4)
    assert 0 < snr < 5
    assert snr == pytest.approx(5 * np.log(0.4 / 0.8) / np.log(0.1 / 0.8))
    with pytest.raises(ValueError):
        res.snr_at_bler("OTFS", "a", 0.01)


def test_layout():
    lay = Layout.make(MCS("16QAM", "conv-r12"), FrameParams(64, 16), 500)
    assert (lay.coded_len, lay.n_blocks, lay.layer_bits) == (1012, 4, 4096)
    full = Layout.make(MCS("16QAM", "conv-r12"), FrameParams(64, 16))
    assert full.n_blocks == 1 and full.info_bits == 2042
    np.testing.assert_array_equal(np.sort(lay.interleaver), np.arange(1012))
    with pytest.raises(ConfigError):
        Layout.make(MCS("16QAM", "conv-r12"), FrameParams(64, 16), 3000)


# --- simulation ------------------------------------------------------------------

def quick(**kw):
    base = dict(frame=SMALL, mcs=(MCS("QPSK", "conv-r12"),), snr_db=(8.0,), trials=3, master_seed=4)
    base.update(kw)
    return LinkConfig(**base)


def test_noiseless_identity_channel_is_error_free():
    cfg = quick(channel=ChannelSpec("identity"), snr_db=(300.0,),
                mcs=(MCS("QPSK", "none"), MCS("64QAM", "conv-r12"), MCS("16QAM", "turbo-r13")))
    for r in run_link(cfg):
        assert r.bit_errors == 0 and r.block_errors == 0


@pytest.mark.parametrize("eq", [("dd-lmmse", "tf-single-tap"), ("dd-genie-dfe", "tf-genie-sic")])
@pytest.mark.parametrize("doppler", [0.0, 300.0])
def test_noiseless_multipath(eq, doppler):
    cfg = quick(channel=ChannelSpec("ETU", doppler), snr_db=(300.0,), mimo=(2, 2), otfs_equalizer=eq[0],
                ofdm_equalizer=eq[1], mcs=(MCS("16QAM", "none"),))
    res = run_link(cfg)
    assert res.get("OTFS", 300.0, "16QAM:none").bit_errors == 0
    # per-bin OFDM receivers treat inter-carrier interference as noise, so they
    # are only error-free without Doppler
    if doppler == 0.0:
        assert res.get("OFDM", 300.0, "16QAM:none").bit_errors == 0


def test_uncoded_qpsk_awgn_matches_q_function():
    ebn0 = 4.0
    cfg = LinkConfig(channel=ChannelSpec("single-tap", 0.0), mcs=(MCS("QPSK", "none"),),
                     snr_db=(ebn0 + 10 * np.log10(2),), trials=100, master_seed=3)
    q = 0.5 * erfc(np.sqrt(10 ** (ebn0 / 10)))
    for r in run_link(cfg):
        se = np.sqrt(q * (1 - q) / r.total_bits)
        assert abs(r.ber - q) < 3 * se, (r.scheme, r.ber, q)


def test_scheme_parity_on_identity_channel():
    # unitary transforms plus a diagonal channel: paired OTFS and OFDM see the same noise energy
    cfg = quick(frame=FrameParams(32, 8, 15e3, 2), channel=ChannelSpec("identity"), mcs=(MCS("16QAM", "none"),),
                snr_db=(8.0, 11.0, 14.0), trials=40)
    res = run_link(cfg)
    for snr in cfg.snr_db:
        a, b = res.get("OTFS", snr, "16QAM:none"), res.get("OFDM", snr, "16QAM:none")
        p = (a.bit_errors + b.bit_errors) / (a.total_bits + b.total_bits)
        se = np.sqrt(2 * p * (1 - p) / a.total_bits)
        assert abs(a.ber - b.ber) <= 3 * se + 1e-12


def test_capacity_accounting_and_ranges():
    cfg = quick(channel=ChannelSpec("EVA", 70.0), mcs=DEFAULT_MCS_SET, snr_db=(0.0, 10.0))
    for r in run_link(cfg):
        assert 0 <= r.ber <= 1 and 0 <= r.bler <= 1
        assert r.throughput <= r.bits_per_symbol * r.rate + 1e-12


def test_trial_order_and_worker_invariance():
    cfg = quick(channel=ChannelSpec("ETU", 300.0), trials=4, snr_db=(4.0,))
    layouts = (Layout.make(cfg.mcs[0], cfg.frame),)
    total = sum(sim._run_trial(cfg, layouts, t) for t in reversed(range(4)))
    res = run_link(cfg)
    assert [r.bit_errors for r in res] == [int(v) for v in total[:, 0, 0, 0]]
    assert run_link(cfg.replace(workers=3)).to_csv() == res.to_csv()


def test_paired_channels_across_schemes():
    cfg = quick(channel=ChannelSpec("ETU", 300.0))
    a = sim.draw_channels(cfg.channel, cfg.frame, (2, 2), sim._seed(cfg, 5, 0))
    b = sim.draw_channels(cfg.channel, cfg.frame, (2, 2), sim._seed(cfg, 5, 0))
    assert a == b and a[0][0] != a[1][1]
    for ch in (c for row_ in a for c in row_):
        for t in ch.taps:
            assert t.doppler / cfg.frame.doppler_resolution == pytest.approx(round(t.doppler / cfg.frame.doppler_resolution))


def test_single_codeblock_study_equals_run_link():
    cfg = quick(channel=ChannelSpec("ETU", 300.0), snr_db=(5.0,))
    full = Layout.make(cfg.mcs[0], cfg.frame).info_bits
    study = run_codeblock_study(cfg, [full])
    link = run_link(cfg)
    for a, b in zip(study, link):
        assert (a.bit_errors, a.block_errors, a.total_bits) == (b.bit_errors, b.block_errors, b.total_bits)
        assert a.mcs == f"{b.mcs}@cb{full}"


def test_codeblock_study_errors():
    cfg = quick()
    with pytest.raises(ConfigError):
        run_codeblock_study(cfg, [10_000])
    with pytest.raises(ConfigError):
        run_codeblock_study(cfg, [])


def test_configuration_errors_before_trials(monkeypatch):
    calls = []
    monkeypatch.setattr(sim, "_run_trial", lambda *a: calls.append(a))
    with pytest.raises(ConfigError):
        run_codeblock_study(quick(), [64, 10_000])
    assert not calls


# --- command line --------------------------------------------------------------

def test_cli_sim_writes_header_and_is_deterministic(cfg_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sim", "--config", str(cfg_file), "--out", str(a)]) == 0
    assert main(["sim", "--config", str(cfg_file), "--out", str(b), "--workers", "2"]) == 0
    text = a.read_text()
    assert text.splitlines()[0] == "scheme,snr_db,mcs,trials,bit_errors,ber,block_errors,bler,throughput,seed"
    assert len(text.splitlines()) == 1 + 2 * 2 * 2
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert main(["sim", "--config", str(cfg_file), "--out", str(c), "--master-seed", "99"]) == 0
    assert c.read_text().splitlines()[1].endswith(",99")


def test_cli_plot(cfg_file, tmp_path):
    pytest.importorskip("matplotlib")
    svg = tmp_path / "p.svg"
    assert main(["sim", "--config", str(cfg_file), "--out", str(tmp_path / "x.csv"), "--plot", str(svg)]) == 0
    assert svg.read_text().lstrip().startswith("<?xml")


def test_cli_codeblock_study(cfg_file, tmp_path):
    out = tmp_path / "cb.csv"
    assert main(["codeblock-study", "--config", str(cfg_file), "--sizes", "50,100", "--out", str(out)]) == 0
    mcs = {line.split(",")[2] for line in out.read_text().splitlines()[1:]}
    assert "QPSK:conv-r12@cb50" in mcs and "16QAM:conv-r12@cb100" in mcs
    assert main(["codeblock-study", "--config", str(cfg_file), "--sizes", "50,x", "--out", str(out)]) == 2


def test_cli_plan_pilots_88_ports(tmp_path, capsys):
    path = tmp_path / "p.toml"
    path.write_text('[frame]\nM = 90\nN = 14\ncp_len = 0\n[channel]\nprofile = "single-tap"\n'
                    '[pilots]\nregion_fraction = 0.07\ndelay_spread = 0.0\ndoppler_spread = 0.0\nports = 88\n')
    assert main(["plan-pilots", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "overhead per port    : 0.08%" in out
    assert "88,0,0,0.07,0.000795455" in out
    path.write_text(path.read_text().replace("ports = 88", "ports = 89"))
    assert main(["plan-pilots", "--config", str(path)]) == 2
    assert "pilots.ports" in capsys.readouterr().err


def test_cli_estimate_demo(cfg_file, capsys):
    assert main(["estimate-demo", "--config", str(cfg_file)]) == 0
    out = capsys.readouterr().out
    assert "estimated" in out and "pilot port 0" in out
    assert main(["estimate-demo", "--config", str(cfg_file)]) == 0
    assert capsys.readouterr().out == out


@pytest.mark.parametrize("argv,needle", [
    (["sim", "--config", "/nonexistent.toml", "--out", "x.csv"], "file not found"),
    (["sim", "--out", "x.csv"], "--config"),
    (["launch"], "invalid choice"),
    ([], "command"),
])
def test_cli_errors(argv, needle, capsys):
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and needle in err and "Traceback" not in err


def test_cli_bad_key_and_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[link]\ntrails = 3\n")
    assert main(["sim", "--config", str(bad), "--out", str(tmp_path / "o.csv")]) == 2
    assert "link.trails" in capsys.readouterr().err
    bad.write_text("[link\n")
    assert main(["plan-pilots", "--config", str(bad)]) == 2
    bad.write_bytes(b"\xff\xfe\x00")
    assert main(["plan-pilots", "--config", str(bad)]) == 2


def test_console_script_runs(cfg_file):
    proc = subprocess.run([sys.executable, "-m", "otfslink.linksim.cli", "plan-pilots", "--config", str(cfg_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "port_count" in proc.stdout


@pytest.mark.parametrize("mimo", [(1, 1), (2, 2), (2, 1)])
def test_structural_gram_matches_dense_oracle(mimo):
    p = FrameParams(8, 4, 15e3, 8)
    chs = sim.draw_channels(ChannelSpec("ETU", 3000.0), p, mimo, 17)
    H = build_effective_matrix(chs, p, "OTFS")
    blocks = [[tf_symbol_blocks(c, p) for c in row] for row in chs]
    np.testing.assert_allclose(sim._otfs_gram(blocks, p), H.conj().T @ H, atol=1e-10)
    # the receiver's matched filter through the TF blocks gives the dense LMMSE
    rng = np.random.default_rng(0)
    y = rng.standard_normal((mimo[1], 8, 4)) + 1j * rng.standard_normal((mimo[1], 8, 4))
    rx = sim._Receiver("OTFS", "dd-lmmse", chs, p)
    xh, _ = rx.equalize(isfft(y, p), np.zeros((mimo[0], 8, 4)), 0.1)
    sinr = per_symbol_sinr(H, 0.1, "dd-lmmse")
    np.testing.assert_allclose(xh.reshape(-1) * sinr / (1 + sinr), lmmse(y.reshape(-1), H, 0.1), atol=1e-10)


def test_etu_14db_regression():
    otfs, ofdm = trends.etu14_regression()
    assert {"OTFS": otfs.block_errors, "OFDM": ofdm.block_errors} == ETU14_BLOCK_ERRORS
    assert otfs.total_blocks == ofdm.total_blocks == 2000
    assert otfs.bler_ci()[1] < ofdm.bler_ci()[0]
