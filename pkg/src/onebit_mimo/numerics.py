"""Numerical kernels shared by the simulation and analysis modules.

Gaussian tail probability, Gauss-Chebyshev quadrature of the second kind,
complex Householder reflectors with a fixed phase convention, and value-style
random stream handles that make every sampling routine replayable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SQRT1_2 = math.sqrt(0.5)


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Value-type handle for a reproducible random substream.

    Two streams with equal (master_seed, stream_index) generate identical
    draws; distinct indices give statistically independent substreams.  The
    handle itself is immutable, so passing it around never advances hidden
    state: every consumer derives a fresh generator.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)


def as_generator(rng: RngStream | np.random.Generator | int) -> np.random.Generator:
    """Normalize a stream handle, a bare generator, or an int seed to a generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot make a generator out of {type(rng).__name__}")


def complex_normal(rng, shape) -> np.ndarray:
    """I.i.d. circularly symmetric complex Gaussian entries with unit variance."""
    gen = as_generator(rng)
    z = gen.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return (z[0] + 1j * z[1]) * SQRT1_2


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------

def q_function(x):
    """Upper tail probability of the standard normal, Q(x) = P(Z > x).

    Evaluated as erfc(x / sqrt(2)) / 2, which stays accurate far into the
    tail where 1 - Phi(x) would round to zero.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("q_function requires finite input")
    out = 0.5 * special.erfc(arr / math.sqrt(2.0))
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Gauss-Chebyshev quadrature (second kind)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for integrals of sqrt(1-t^2) * p(t) on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size


def chebyshev_rule(order: int) -> QuadratureRule:
    """Gauss-Chebyshev rule of the second kind.

    Nodes t_i = cos(i pi / (n+1)) and weights w_i = pi/(n+1) sin^2(i pi/(n+1))
    integrate sqrt(1 - t^2) * p(t) exactly for polynomials p of degree
    <= 2n - 1.  The weights sum to pi/2 in exact arithmetic.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    i = np.arange(1, order + 1)
    theta = i * np.pi / (order + 1)
    nodes = np.cos(theta)
    weights = np.pi / (order + 1) * np.sin(theta) ** 2
    return QuadratureRule(nodes=nodes, weights=weights)


# ---------------------------------------------------------------------------
# complex Householder reflectors
# ---------------------------------------------------------------------------

def _reflector_parts(v: np.ndarray):
    """Return (norm, phase, u, 1 + r) for the reflector of v.

    Phase convention: v[0] / ||v|| = r * phase with r >= 0, and phase = 1
    when v[0] == 0.  The reflector is R(v) = -phase * (I - u u^H / (1 + r))
    with u = v/||v|| + phase * e_1; this satisfies R(v) e_1 = v / ||v|| and
    R(v)^H v = ||v|| e_1.
    """
    v = np.asarray(v)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("reflector input must be a 1-D vector")
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("reflector input must be nonzero and finite")
    v0 = complex(v[0])
    phase = v0 / abs(v0) if v0 != 0 else 1.0 + 0.0j
    r = abs(v0) / norm
    u = v / norm + np.zeros(v.size, dtype=complex)
    u[0] += phase
    return norm, phase, u, 1.0 + r


def reflector(v) -> np.ndarray:
    """Dense unitary reflector R(v) mapping e_1 to v / ||v||."""
    _, phase, u, denom = _reflector_parts(v)
    m = u.size
    return -phase * (np.eye(m, dtype=complex) - np.outer(u, u.conj()) / denom)


def apply_reflector(v, w) -> np.ndarray:
    """Compute R(v) @ w without forming R.  w may be a vector or a matrix."""
    _, phase, u, denom = _reflector_parts(v)
    w = np.asarray(w, dtype=complex)
    proj = np.tensordot(u.conj(), w, axes=(0, 0)) / denom
    return -phase * (w - np.multiply.outer(u, proj))


def apply_reflector_adjoint(v, w) -> np.ndarray:
    """Compute R(v)^H @ w without forming R."""
    _, phase, u, denom = _reflector_parts(v)
    w = np.asarray(w, dtype=complex)
    proj = np.tensordot(u.conj(), w, axes=(0, 0)) / denom
    return -np.conj(phase) * (w - np.multiply.outer(u, proj))


def generalized_reflector(k: int, v) -> np.ndarray:
    """Block reflector acting as the identity on the first k-1 coordinates.

    Returns blockdiag(I_{k-1}, R(v[k-1:])) for 1 <= k <= m where m = len(v).
    """
    v = np.asarray(v)
    m = v.size
    if not 1 <= k <= m:
        raise ValueError(f"index k={k} outside 1..{m}")
    out = np.eye(m, dtype=complex)
    out[k - 1:, k - 1:] = reflector(v[k - 1:])
    return out


def apply_generalized_reflector(k: int, v, w) -> np.ndarray:
    """blockdiag(I_{k-1}, R(v[k-1:])) @ w, matrix-free."""
    v = np.asarray(v)
    w = np.asarray(w, dtype=complex)
    if not 1 <= k <= v.size:
        raise ValueError(f"index k={k} outside 1..{v.size}")
    out = w.copy()
    out[k - 1:] = apply_reflector(v[k - 1:], w[k - 1:])
    return out


def apply_generalized_reflector_adjoint(k: int, v, w) -> np.ndarray:
    """blockdiag(I_{k-1}, R(v[k-1:]))^H @ w, matrix-free."""
    v = np.asarray(v)
    w = np.asarray(w, dtype=complex)
    if not 1 <= k <= v.size:
        raise ValueError(f"index k={k} outside 1..{v.size}")
    out = w.copy()
    out[k - 1:] = apply_reflector_adjoint(v[k - 1:], w[k - 1:])
    return out


def reflector_tail_apply(v, w) -> np.ndarray:
    """B(v)^H @ w where B(v) is R(v) with its first column removed.

    Since R(v)^H w stacks (v/||v||)^H w on top of B(v)^H w, the result is
    just the tail of the adjoint application; nothing is materialized.
    """
    full = apply_reflector_adjoint(v, w)
    return full[1:]


def reflector_tail_embed(v, z) -> np.ndarray:
    """B(v) @ z, i.e. R(v) applied to z with a zero prepended."""
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v)
    if z.size != v.size - 1:
        raise ValueError("tail factor expects a vector one shorter than v")
    padded = np.concatenate([np.zeros(1, dtype=complex), z])
    return apply_reflector(v, padded)
