"""Downlink system model: Rayleigh channel, QPSK symbols, one-bit DACs.

Conventions used throughout the package: the channel H is K x N with i.i.d.
CN(0, 1/N) entries, transmit symbols live on the unit-modulus QPSK
constellation, and the per-antenna one-bit quantizer maps any complex number
to the quadrant point (+-sqrt(2)/2, +-sqrt(2)/2) with sign(0) := +1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import SQRT1_2, as_generator, complex_normal

QPSK_POINTS = SQRT1_2 * np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])

DEGENERACY_CUTOFF = 1e-12


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, noise level, and master seed of one simulated system."""

    n_antennas: int
    n_users: int
    noise_variance: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if self.n_antennas <= self.n_users:
            raise ValueError("n_antennas must exceed n_users (gamma > 1)")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def gamma(self) -> float:
        """Antenna-to-user ratio N / K."""
        return self.n_antennas / self.n_users


@dataclass(frozen=True)
class SvdFactors:
    """Thin wrapper around H = U @ D @ V^H with descending singular values."""

    u: np.ndarray
    d: np.ndarray
    v: np.ndarray

    @property
    def degenerate(self) -> bool:
        """True when the channel is numerically rank deficient."""
        return bool(self.d[-1] < DEGENERACY_CUTOFF * self.d[0])


def sample_channel(cfg: SystemConfig, rng) -> np.ndarray:
    """Draw a K x N channel with i.i.d. CN(0, 1/N) entries.

    Each entry is (g_re + 1j * g_im) / sqrt(2 N) with independent standard
    normal g_re, g_im, so E|H_kn|^2 = 1/N and rows have unit expected norm.
    """
    gen = as_generator(rng)
    scale = 1.0 / np.sqrt(cfg.n_antennas)
    return scale * complex_normal(gen, (cfg.n_users, cfg.n_antennas))


def svd(h: np.ndarray) -> SvdFactors:
    """Full singular value decomposition of a wide channel matrix."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] >= h.shape[1]:
        raise ValueError("expected a K x N matrix with K < N")
    u, d, vh = np.linalg.svd(h, full_matrices=True)
    return SvdFactors(u=u, d=d, v=vh.conj().T)


def sample_symbols(k: int, rng) -> np.ndarray:
    """K i.i.d. uniform QPSK symbols."""
    if k < 1:
        raise ValueError("need at least one user")
    gen = as_generator(rng)
    return QPSK_POINTS[gen.integers(0, 4, size=k)]


def one_bit_quantize(v) -> np.ndarray:
    """Per-component one-bit DAC: sqrt(2)/2 * (sign(Re v) + 1j sign(Im v)).

    Zeros quantize to +1 in the affected component.
    """
    v = np.asarray(v)
    re = np.where(v.real >= 0, 1.0, -1.0)
    im = np.where(v.imag >= 0, 1.0, -1.0)
    return SQRT1_2 * (re + 1j * im)


def nearest_neighbor_decode(y) -> np.ndarray:
    """Map each received sample to the closest QPSK constellation point.

    Quadrant decisions are equivalent to minimum-distance decoding on the
    QPSK grid, with ties (exact zeros) resolved toward +1.
    """
    return one_bit_quantize(y)
