"""Large-system analysis of the one-bit downlink.

In the limit K, N -> inf with gamma = N/K > 1 fixed, the per-user channel
after one-bit precoding collapses to a scalar model

    y = T_s * s + T_g * g + n,      g ~ CN(0, 1),

whose constants depend on the shaper f only through moments of the limiting
squared-singular-value law (Marchenko-Pastur with ratio c = 1/gamma):

    T_s = sqrt(2 gamma / (pi E[f(d)^2])) * E[d f(d)]
    T_g^2 = 2 gamma var[d f(d)] / (pi E[f(d)^2]) + 1 - 2/pi

with d = sqrt(lambda).  The post-decoding SNR is T_s^2 / (T_g^2 + sigma2)
and the QPSK symbol error probability is approximately 2 Q(sqrt(SNR)).

All expectations are computed with a Gauss-Chebyshev rule of the second
kind, whose weight absorbs the square-root edge factors of the
Marchenko-Pastur density exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .numerics import as_generator, chebyshev_rule, q_function
from .precoding import TWO_OVER_PI, SpectralShaper, optimal_rho, shaper_eval

DEFAULT_ORDER = 512
_CDF_GRID = 4097


@dataclass(frozen=True)
class MarchenkoPastur:
    """Limiting eigenvalue law of H H^H for a K x N i.i.d. CN(0, 1/N) channel.

    c = K/N must lie in (0, 1); the support is [a, b] with
    a = (1 - sqrt(c))^2 and b = (1 + sqrt(c))^2, and there is no point mass.
    """

    c: float

    def __post_init__(self) -> None:
        if not 0 < self.c < 1:
            raise ValueError("aspect ratio c must lie in (0, 1)")

    @classmethod
    def from_gamma(cls, gamma: float) -> "MarchenkoPastur":
        if not gamma > 1:
            raise ValueError("gamma must exceed 1")
        return cls(c=1.0 / gamma)

    @property
    def a(self) -> float:
        return (1.0 - math.sqrt(self.c)) ** 2

    @property
    def b(self) -> float:
        return (1.0 + math.sqrt(self.c)) ** 2


def mp_pdf(mp: MarchenkoPastur, x) -> np.ndarray:
    """Marchenko-Pastur density sqrt((x-a)(b-x)) / (2 pi c x), zero off-support."""
    x = np.asarray(x, dtype=float)
    inside = (x > mp.a) & (x < mp.b)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((xi - mp.a) * (mp.b - xi)) / (2.0 * np.pi * mp.c * xi)
    return out if out.ndim else float(out)


def mp_expect(mp: MarchenkoPastur, g: Callable, order: int = DEFAULT_ORDER,
              check_tol: float = 1e-10) -> float:
    """E[g(lambda)] under the Marchenko-Pastur law.

    Substituting x = (a+b)/2 + (b-a)/2 * t turns the edge factor
    sqrt((x-a)(b-x)) into the Chebyshev weight sqrt(1-t^2) exactly, so the
    integral reduces to (2/pi) sum_i w_i g(x_i) / x_i.  The result is
    evaluated at the requested order and at twice that order; disagreement
    beyond check_tol flags a shaper too rough for the rule and raises.
    """
    first = _mp_quad(mp, g, order)
    second = _mp_quad(mp, g, 2 * order)
    if not np.isfinite(second):
        raise ValueError("integrand produced non-finite values on the support")
    if abs(second - first) > check_tol * max(1.0, abs(second)):
        raise RuntimeError(
            f"quadrature self-check failed: order {order} -> {first!r}, "
            f"order {2 * order} -> {second!r}"
        )
    return second


def _mp_quad(mp: MarchenkoPastur, g: Callable, order: int) -> float:
    rule = chebyshev_rule(order)
    mid = 0.5 * (mp.a + mp.b)
    half = 0.5 * (mp.b - mp.a)
    x = mid + half * rule.nodes
    vals = np.asarray(g(x), dtype=float)
    if vals.shape != x.shape:
        raise ValueError("integrand must be vectorized over the nodes")
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand produced non-finite values on the support")
    return TWO_OVER_PI * float(np.sum(rule.weights * vals / x))


@lru_cache(maxsize=16)
def _cdf_table(c: float):
    """Cumulative distribution of the MP law on a dense edge-refined grid.

    The theta substitution x = mid + half*cos(theta) makes the integrand
    half^2 sin^2(theta) / (2 pi c x), smooth up to the edges, so a fine
    trapezoid rule is accurate to ~1e-8.
    """
    mp = MarchenkoPastur(c=c)
    mid = 0.5 * (mp.a + mp.b)
    half = 0.5 * (mp.b - mp.a)
    theta = np.linspace(np.pi, 0.0, _CDF_GRID)
    x = mid + half * np.cos(theta)
    dens_dtheta = half * half * np.sin(theta) ** 2 / (2.0 * np.pi * c * x)
    cdf = np.concatenate([[0.0], np.cumsum(
        0.5 * (dens_dtheta[1:] + dens_dtheta[:-1]) * np.diff(theta))])
    cdf /= cdf[-1]
    return x, cdf


def mp_cdf(mp: MarchenkoPastur, x) -> np.ndarray:
    """P(lambda <= x) under the Marchenko-Pastur law."""
    grid, cdf = _cdf_table(mp.c)
    return np.interp(np.asarray(x, dtype=float), grid, cdf, left=0.0, right=1.0)


def mp_sample(mp: MarchenkoPastur, n: int, rng) -> np.ndarray:
    """I.i.d. draws from the MP law by inverting the tabulated CDF."""
    if n < 1:
        raise ValueError("need at least one sample")
    gen = as_generator(rng)
    grid, cdf = _cdf_table(mp.c)
    return np.interp(gen.uniform(size=n), cdf, grid)


# ---------------------------------------------------------------------------
# scalar-model constants and closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticConstants:
    """Signal gain, effective Gaussian interference gain, SNR, and SEP."""

    t_s: float
    t_g: float
    snr: float
    sep: float


def asymptotic_sep(snr: float) -> float:
    """QPSK symbol error probability of the scalar model, capped at 1."""
    if not snr >= 0:
        raise ValueError("snr must be >= 0")
    return min(1.0, 2.0 * q_function(math.sqrt(snr)))


def asymptotic_constants(f: SpectralShaper, gamma: float, sigma2: float,
                         order: int = DEFAULT_ORDER) -> AsymptoticConstants:
    """Evaluate the scalar-model constants for a shaper at ratio gamma.

    The shaper acts on singular values d = sqrt(lambda); the three moments
    E[f^2], E[d f], and E[(d f)^2] are quadratures against the MP law.
    """
    if not sigma2 >= 0:
        raise ValueError("sigma2 must be >= 0")
    mp = MarchenkoPastur.from_gamma(gamma)

    def f_sq(lam):
        return shaper_eval(f, np.sqrt(lam)) ** 2

    def df(lam):
        d = np.sqrt(lam)
        return d * shaper_eval(f, d)

    def df_sq(lam):
        return lam * shaper_eval(f, np.sqrt(lam)) ** 2

    e_f2 = mp_expect(mp, f_sq, order=order)
    e_df = mp_expect(mp, df, order=order)
    e_df2 = mp_expect(mp, df_sq, order=order)
    if not e_f2 > 0:
        raise ValueError("shaper has vanishing second moment")
    var_df = max(e_df2 - e_df * e_df, 0.0)

    t_s = math.sqrt(2.0 * gamma / (math.pi * e_f2)) * e_df
    t_g = math.sqrt(2.0 * gamma * var_df / (math.pi * e_f2) + 1.0 - TWO_OVER_PI)
    snr = t_s * t_s / (t_g * t_g + sigma2)
    return AsymptoticConstants(t_s=t_s, t_g=t_g, snr=snr, sep=asymptotic_sep(snr))


def snr_mf_closed(gamma: float, sigma2: float) -> float:
    """Matched filter: SNR = (2/pi) gamma / (1 + sigma2)."""
    _check_gs(gamma, sigma2)
    return TWO_OVER_PI * gamma / (1.0 + sigma2)


def snr_zf_closed(gamma: float, sigma2: float) -> float:
    """Zero forcing: SNR = (2/pi)(gamma - 1) / (1 - 2/pi + sigma2)."""
    _check_gs(gamma, sigma2)
    return TWO_OVER_PI * (gamma - 1.0) / (1.0 - TWO_OVER_PI + sigma2)


def snr_opt_closed(gamma: float, sigma2: float) -> float:
    """Best achievable scalar-model SNR over all shapers.

    With rho_hat = gamma * rho* and u_hat = rho_hat + gamma - 1,

        SNR_opt = (sqrt(u_hat^2 + 4 rho_hat) + u_hat) / (2 rho_hat) - 1.

    This parametrization satisfies both sanity limits: it equals
    m / (1 - m) with m = E[lambda / (lambda + rho*)], and it approaches
    the zero-forcing SNR exactly as gamma grows.
    """
    _check_gs(gamma, sigma2)
    rho_hat = gamma * optimal_rho(gamma, sigma2)
    u_hat = rho_hat + gamma - 1.0
    return (math.sqrt(u_hat * u_hat + 4.0 * rho_hat) + u_hat) / (2.0 * rho_hat) - 1.0


def snr_opt_naive(gamma: float, sigma2: float) -> float:
    """Same closed form with the unscaled regularizer rho* in place of
    gamma * rho*.

    Kept for comparison only: this variant is inconsistent with the
    quadrature optimum and with the zero-forcing limit, and snr_opt_closed
    is the form the rest of the package trusts.
    """
    _check_gs(gamma, sigma2)
    rho = optimal_rho(gamma, sigma2)
    u = rho + gamma - 1.0
    return (math.sqrt(u * u + 4.0 * rho) + u) / (2.0 * rho) - 1.0


def optimal_shaper(gamma: float, sigma2: float) -> SpectralShaper:
    """SNR-maximizing shaper f*(x) = x / (x^2 + rho*), an RZF at rho*."""
    return SpectralShaper.rzf(optimal_rho(gamma, sigma2))


def _check_gs(gamma: float, sigma2: float) -> None:
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if not sigma2 >= 0:
        raise ValueError("sigma2 must be >= 0")
