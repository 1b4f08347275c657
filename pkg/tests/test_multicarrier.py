import numpy as np
import pytest

from otfslink.multicarrier import SampleStream, demodulate, modulate
from otfslink.transforms import FrameParams


def rand_grid(rng, M, N):
    return rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))


def test_dc_subcarrier():
    p = FrameParams(4, 1, cp_len=0)
    tf = np.zeros((4, 1), complex)
    tf[0, 0] = 1
    s = modulate(tf, p)
    np.testing.assert_allclose(s.samples, 0.5, atol=1e-15)
    assert s.sample_rate == p.sample_rate


def test_cyclic_prefix_copies_tail():
    p = FrameParams(4, 1, cp_len=2)
    s = modulate(rand_grid(np.random.default_rng(0), 4, 1), p).samples
    np.testing.assert_allclose(s[0:2], s[4:6])


@pytest.mark.parametrize("cp", [0, 1, 4, 9])
def test_round_trip(cp):
    rng = np.random.default_rng(cp)
    p = FrameParams(16, 8, cp_len=cp)
    tf = rand_grid(rng, 16, 8)
    s = modulate(tf, p)
    assert len(s) == 8 * (16 + cp)
    assert np.max(np.abs(demodulate(s, p) - tf)) < 1e-12


@pytest.mark.parametrize("cp", [1, 4, 9])
def test_cp_energy(cp):
    M, N = 16, 8
    p = FrameParams(M, N, cp_len=cp)
    rng = np.random.default_rng(cp)
    # exact: the CP repeats each symbol's last cp samples
    tf = rand_grid(rng, M, N)
    sym = modulate(tf, p).samples.reshape(N, M + cp)
    e = np.linalg.norm(sym) ** 2
    assert e == pytest.approx(np.linalg.norm(tf) ** 2 + np.linalg.norm(sym[:, -cp:]) ** 2, rel=1e-12)
    # exact (M+cp)/M scaling when every symbol's time samples have flat magnitude
    one_tone = np.zeros((M, N), complex)
    one_tone[rng.integers(0, M, N), np.arange(N)] = np.exp(2j * np.pi * rng.random(N))
    ratio = np.linalg.norm(modulate(one_tone, p).samples) ** 2 / np.linalg.norm(one_tone) ** 2
    assert ratio == pytest.approx((M + cp) / M, rel=1e-10)
    # on average for i.i.d. data
    tfs = rand_grid(rng, 2000 * M, N).reshape(2000, M, N)
    ratio = np.sum(np.abs(modulate(tfs, p).samples) ** 2) / np.sum(np.abs(tfs) ** 2)
    assert ratio == pytest.approx((M + cp) / M, rel=0.01)


def test_zero_stream():
    p = FrameParams(8, 2, cp_len=2)
    assert not np.any(demodulate(SampleStream(np.zeros(p.frame_len, complex), p.sample_rate), p))


@pytest.mark.parametrize("d", [0, 1, 3, 4])
def test_delay_within_cp_is_a_phase_ramp(d):
    M, cp = 16, 4
    p = FrameParams(M, 1, cp_len=cp)
    tf = rand_grid(np.random.default_rng(d), M, 1)
    s = modulate(tf, p).samples
    # a delay of d samples fed from the previous (silent) symbol's tail
    delayed = np.concatenate([np.zeros(d, complex), s[: len(s) - d]])
    out = demodulate(SampleStream(delayed, p.sample_rate), p)
    ramp = np.exp(-2j * np.pi * np.arange(M) * d / M)[:, None]
    np.testing.assert_allclose(out, tf * ramp, atol=1e-12)
    np.testing.assert_allclose(np.abs(out), np.abs(tf), atol=1e-12)


def test_batch_axes():
    rng = np.random.default_rng(5)
    p = FrameParams(8, 3, cp_len=2)
    tfs = rng.standard_normal((2, 8, 3)) + 0j
    s = modulate(tfs, p)
    assert s.samples.shape == (2, p.frame_len)
    np.testing.assert_allclose(s.samples[1], modulate(tfs[1], p).samples)
    np.testing.assert_allclose(demodulate(s, p), tfs, atol=1e-12)


def test_demodulate_checks_length_and_rate():
    p = FrameParams(8, 2, cp_len=2)
    with pytest.raises(ValueError, match="samples"):
        demodulate(SampleStream(np.zeros(p.frame_len - 1, complex), p.sample_rate), p)
    with pytest.raises(ValueError, match="sample rate"):
        demodulate(SampleStream(np.zeros(p.frame_len, complex), 2 * p.sample_rate), p)
