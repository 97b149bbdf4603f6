import numpy as np
import pytest

from onebit_mimo.channel import (QPSK_POINTS, SvdFactors, SystemConfig,
                                 nearest_neighbor_decode, one_bit_quantize,
                                 sample_channel, sample_symbols, svd)
from onebit_mimo.numerics import SQRT1_2, RngStream

CFG = SystemConfig(n_antennas=24, n_users=6, noise_variance=0.1, seed=3)


def test_config_validation_and_gamma():
    assert CFG.gamma == 4.0
    with pytest.raises(ValueError):
        SystemConfig(n_antennas=4, n_users=4, noise_variance=0.0)
    with pytest.raises(ValueError):
        SystemConfig(n_antennas=8, n_users=0, noise_variance=0.0)
    with pytest.raises(ValueError):
        SystemConfig(n_antennas=8, n_users=2, noise_variance=-1.0)
    with pytest.raises(ValueError):
        SystemConfig(n_antennas=8, n_users=2, noise_variance=0.0, seed=-1)


def test_channel_moments():
    cfg = SystemConfig(n_antennas=2000, n_users=500, noise_variance=0.0)
    h = sample_channel(cfg, RngStream(17))
    assert h.shape == (500, 2000)
    # entries are CN(0, 1/N): overall power 1/N, split evenly over re/im
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0 / 2000, rel=0.01)
    assert np.var(h.real) == pytest.approx(0.5 / 2000, rel=0.02)
    assert abs(h.mean()) < 3e-5
    # rows carry unit expected energy
    assert np.mean(np.sum(np.abs(h) ** 2, axis=1)) == pytest.approx(1.0,
                                                                    rel=0.02)


def test_channel_replay():
    a = sample_channel(CFG, RngStream(CFG.seed, 1))
    b = sample_channel(CFG, RngStream(CFG.seed, 1))
    c = sample_channel(CFG, RngStream(CFG.seed, 2))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_svd_reconstructs_and_is_unitary():
    h = sample_channel(CFG, RngStream(5))
    fac = svd(h)
    k, n = h.shape
    assert fac.u.shape == (k, k) and fac.v.shape == (n, n)
    assert fac.d.shape == (k,)
    assert np.all(np.diff(fac.d) <= 0)
    assert np.abs(fac.u.conj().T @ fac.u - np.eye(k)).max() < 1e-12
    assert np.abs(fac.v.conj().T @ fac.v - np.eye(n)).max() < 1e-12
    rebuilt = fac.u @ np.diag(fac.d) @ fac.v[:, :k].conj().T
    assert np.abs(rebuilt - h).max() < 1e-12
    assert not fac.degenerate


def test_svd_single_user_example():
    fac = svd(np.array([[1.0, 0.0]]))
    assert fac.d == pytest.approx([1.0])
    with pytest.raises(ValueError):
        svd(np.eye(3))


def test_degenerate_flag():
    fac = SvdFactors(u=np.eye(2), d=np.array([1.0, 1e-15]), v=np.eye(3))
    assert fac.degenerate


def test_symbols_live_on_the_constellation():
    s = sample_symbols(4000, RngStream(1))
    assert np.allclose(np.abs(s), 1.0)
    hits = {complex(p): np.sum(s == p) for p in QPSK_POINTS}
    assert all(count > 800 for count in hits.values())
    assert np.array_equal(s, sample_symbols(4000, RngStream(1)))
    with pytest.raises(ValueError):
        sample_symbols(0, RngStream(1))


def test_quantizer_examples():
    v = np.array([3.0 - 2.0j, -0.5 + 9.0j, 1.0 + 1.0j])
    out = one_bit_quantize(v)
    expect = SQRT1_2 * np.array([1 - 1j, -1 + 1j, 1 + 1j])
    assert np.array_equal(out, expect)
    assert np.allclose(np.abs(out), 1.0)


def test_quantizer_resolves_zero_up():
    # sign(0) := +1, including the negative-zero float
    out = one_bit_quantize(np.array([0.0 + 0.0j, -0.0 - 0.0j, 0.0 - 1.0j]))
    assert out[0] == SQRT1_2 * (1 + 1j)
    assert out[1] == SQRT1_2 * (1 + 1j)
    assert out[2] == SQRT1_2 * (1 - 1j)


def test_decode_is_minimum_distance():
    gen = np.random.default_rng(23)
    y = gen.standard_normal(500) + 1j * gen.standard_normal(500)
    decoded = nearest_neighbor_decode(y)
    brute = QPSK_POINTS[np.argmin(np.abs(y[:, None] - QPSK_POINTS[None, :]),
                                  axis=1)]
    assert np.array_equal(decoded, brute)


def test_spectrum_follows_the_limit_law():
    from scipy import stats

    from onebit_mimo.asymptotics import MarchenkoPastur, mp_cdf

    cfg = SystemConfig(n_antennas=800, n_users=200, noise_variance=0.0)
    h = sample_channel(cfg, RngStream(41))
    eig = np.linalg.svd(h, compute_uv=False) ** 2
    mp = MarchenkoPastur.from_gamma(cfg.gamma)
    res = stats.kstest(eig, lambda x: mp_cdf(mp, x))
    assert res.statistic < 0.05
