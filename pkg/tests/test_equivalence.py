"""Reduced-model checks.

The iterative chain and the collapsed scalar model share their ingredient
draws, so quantities that are algebraically identical (like the shaped
first vector) must agree to rounding, while the outputs agree in
distribution only and are compared with the four-test battery.
"""
import math

import numpy as np
import pytest
from scipy import stats

from onebit_mimo.channel import SystemConfig
from onebit_mimo.equivalence import (ConvergenceRow, convergence_report,
                                     direct_model_samples,
                                     distribution_match_test,
                                     equivalent_model_draw,
                                     equivalent_model_samples, haar_sample,
                                     hd_iterative_draw, hd_model_samples)
from onebit_mimo.numerics import RngStream
from onebit_mimo.precoding import SpectralShaper

ZF = SpectralShaper.zf()


def _cfg(k=12, gamma=4, sigma2=0.1, seed=7):
    return SystemConfig(n_antennas=gamma * k, n_users=k,
                        noise_variance=sigma2, seed=seed)


def test_models_need_two_users():
    small = SystemConfig(n_antennas=4, n_users=1, noise_variance=0.0)
    with pytest.raises(ValueError):
        hd_iterative_draw(small, ZF, RngStream(0))
    with pytest.raises(ValueError):
        equivalent_model_draw(small, ZF, RngStream(0))


def test_chain_and_scalar_model_share_ingredients():
    cfg = _cfg()
    for i in (1, 2, 3):
        trace = hd_iterative_draw(cfg, ZF, RngStream(cfg.seed, i))
        draw = equivalent_model_draw(cfg, ZF, RngStream(cfg.seed, i))
        assert np.array_equal(trace.d, draw.d)
        assert np.array_equal(trace.s, draw.s)
        # the shaped first vector is the same algebra in both routes
        assert np.abs(trace.s1 - draw.s_tilde1).max() < 1e-12
        assert trace.y_tilde.shape == draw.y_hat.shape == (cfg.n_users,)


def test_chain_intermediate_norms():
    cfg = _cfg(k=16, sigma2=0.0)
    trace = hd_iterative_draw(cfg, ZF, RngStream(cfg.seed, 1))
    n = cfg.n_antennas
    # quantized vector sits on the scaled hypercube
    assert np.allclose(np.abs(trace.s2), 1.0)
    # reflectors preserve norms along the chain
    assert np.linalg.norm(trace.v1) == pytest.approx(
        np.linalg.norm(trace.s2), rel=1e-12)
    assert trace.s1.shape == (n,)
    assert np.linalg.norm(trace.s1[cfg.n_users:]) == 0.0


def test_scalar_draw_reproducible_and_typed():
    cfg = _cfg()
    a = equivalent_model_draw(cfg, ZF, RngStream(3, 5))
    b = equivalent_model_draw(cfg, ZF, RngStream(3, 5))
    assert a.t_s == b.t_s and a.t_g == b.t_g
    assert isinstance(a.t_s, complex)
    assert isinstance(a.t_g, float) and a.t_g > 0
    assert isinstance(a.c_1, complex)
    assert np.array_equal(a.y_hat, b.y_hat)
    # y_hat really is t_s s + t_g g_2 + noise; with sigma2 = 0 it is exact
    noiseless = _cfg(sigma2=0.0)
    d = equivalent_model_draw(noiseless, ZF, RngStream(3, 5))
    assert np.abs(d.y_hat - (d.t_s * d.s + d.t_g * d.g_2)).max() < 1e-12


def test_quantizer_correlation_reaches_its_limit():
    # c_1 ||s_tilde1|| / sqrt(N) estimates E[conj(z) q(z)] = sqrt(2/pi)
    cfg = SystemConfig(n_antennas=8000, n_users=2000, noise_variance=0.0,
                       seed=13)
    draw = equivalent_model_draw(cfg, ZF, RngStream(13, 1), d_source="mp")
    val = abs(draw.c_1) * np.linalg.norm(draw.s_tilde1) / math.sqrt(8000)
    assert val == pytest.approx(math.sqrt(2.0 / math.pi), rel=0.02)


def test_bad_spectrum_source_is_rejected():
    with pytest.raises(ValueError):
        equivalent_model_draw(_cfg(), ZF, RngStream(0), d_source="guess")


def test_sampler_shapes_and_replay():
    cfg = _cfg(k=8, seed=5)
    y, s = direct_model_samples(cfg, ZF, 10)
    assert y.shape == s.shape == (80,)
    y2, _ = direct_model_samples(cfg, ZF, 10)
    assert np.array_equal(y, y2)
    ye, se = equivalent_model_samples(cfg, ZF, 10)
    yh, sh = hd_model_samples(cfg, ZF, 10)
    assert ye.shape == yh.shape == (80,)
    # symbol streams coincide because the substream layout is shared
    assert np.array_equal(se, sh)


def test_distribution_match_on_equal_laws():
    cfg = SystemConfig(n_antennas=64, n_users=32, noise_variance=0.1,
                       seed=42)
    direct = direct_model_samples(cfg, ZF, 150)
    report = distribution_match_test(direct,
                                     equivalent_model_samples(cfg, ZF, 150))
    assert report.passed
    assert set(report.tests) == {"ks_real", "ks_imag", "mean", "variance"}
    assert report.n_a == report.n_b == 150 * 32
    chain = distribution_match_test(direct, hd_model_samples(cfg, ZF, 150))
    assert chain.passed


def test_distribution_match_detects_wrong_noise():
    cfg = SystemConfig(n_antennas=64, n_users=32, noise_variance=0.1,
                       seed=42)
    hot = SystemConfig(n_antennas=64, n_users=32, noise_variance=0.2,
                       seed=42)
    report = distribution_match_test(
        direct_model_samples(cfg, ZF, 150),
        equivalent_model_samples(hot, ZF, 150))
    assert not report.passed
    assert not report.tests["variance"].passed


def test_distribution_match_validation():
    y = np.ones(4, dtype=complex)
    s = np.ones(4, dtype=complex)
    with pytest.raises(ValueError):
        distribution_match_test((y, s), (y, s))  # too few samples
    with pytest.raises(ValueError):
        distribution_match_test((np.ones(10), np.ones(9)),
                                (np.ones(10), np.ones(10)))
    big = (np.ones(20, dtype=complex), np.ones(20, dtype=complex))
    with pytest.raises(ValueError):
        distribution_match_test(big, big, level=0.0)


def test_coefficients_converge_with_size():
    cfgs = [SystemConfig(n_antennas=4 * k, n_users=k, noise_variance=0.0,
                         seed=17) for k in (50, 400)]
    rows = convergence_report(cfgs, ZF, draws_per_size=12, d_source="svd")
    assert [r.n_users for r in rows] == [50, 400]
    assert all(isinstance(r, ConvergenceRow) for r in rows)
    assert rows[1].median_ts_err < rows[0].median_ts_err
    assert rows[1].median_tg_err < rows[0].median_tg_err
    assert rows[1].median_ts_err < 0.05
    assert rows[1].median_tg_err < 0.05


def test_convergence_report_validation():
    with pytest.raises(ValueError):
        convergence_report([], ZF)
    mixed = [_cfg(k=8, gamma=4), _cfg(k=8, gamma=6)]
    with pytest.raises(ValueError):
        convergence_report(mixed, ZF)
    with pytest.raises(ValueError):
        convergence_report([_cfg()], ZF, draws_per_size=0)


def test_auto_spectrum_switches_to_the_limit_law():
    small = SystemConfig(n_antennas=32, n_users=8, noise_variance=0.0,
                         seed=1)
    big = SystemConfig(n_antennas=1200, n_users=300, noise_variance=0.0,
                       seed=1)
    rows = convergence_report([small, big], ZF, draws_per_size=2)
    assert rows[0].d_source == "svd"
    assert rows[1].d_source == "mp"


# ---------------------------------------------------------------------------
# Haar sampler
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("m", [1, 2, 3, 8, 33])
def test_haar_matrices_are_unitary(m):
    for j in range(5):
        q = haar_sample(m, RngStream(m, j))
        assert q.shape == (m, m)
        assert np.abs(q.conj().T @ q - np.eye(m)).max() < 1e-10


def test_haar_one_dimensional_case_is_a_phase():
    q = haar_sample(1, RngStream(4, 2))
    assert abs(abs(q[0, 0]) - 1.0) < 1e-14
    assert np.array_equal(q, haar_sample(1, RngStream(4, 2)))
    with pytest.raises(ValueError):
        haar_sample(0, RngStream(0))


def test_haar_first_entry_moment():
    m, draws = 8, 3000
    sq = np.empty(draws)
    for j in range(draws):
        sq[j] = abs(haar_sample(m, RngStream(77, j))[0, 0]) ** 2
    z = (sq.mean() - 1.0 / m) / (sq.std(ddof=1) / math.sqrt(draws))
    assert abs(z) < 3.5


def test_haar_law_is_rotation_invariant():
    # independent draws on each side; one side rotated by a fixed unitary
    m, draws = 8, 3000
    fourier = np.exp(-2j * np.pi * np.outer(np.arange(m),
                                            np.arange(m)) / m) / math.sqrt(m)
    first = np.empty(draws, dtype=complex)
    rotated = np.empty(draws, dtype=complex)
    for j in range(draws):
        first[j] = haar_sample(m, RngStream(77, j))[0, 0]
        col = haar_sample(m, RngStream(77, 200_000 + j))[:, 0]
        rotated[j] = (fourier @ col)[0]
    assert stats.ks_2samp(first.real, rotated.real).pvalue > 0.005
    assert stats.ks_2samp(first.imag, rotated.imag).pvalue > 0.005
