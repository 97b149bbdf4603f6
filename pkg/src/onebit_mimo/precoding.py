"""Linear precoders built by reshaping the channel's singular value spectrum.

A precoder here is P = V f(D)^T U^H for a positive shaping function f applied
to the singular values of H = U D V^H.  Matched filter, zero forcing, and
regularized zero forcing are the shapers f(x) = x, 1/x, and x / (x^2 + rho).
Precoders are used unnormalized: the one-bit DAC erases any positive scale
on P, so no total-power rescaling is applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg as sla

from .channel import DEGENERACY_CUTOFF, SvdFactors, svd

TWO_OVER_PI = 2.0 / math.pi


class DegenerateChannelError(ValueError):
    """Raised when a shaper would blow up on a numerically zero singular value."""


@dataclass(frozen=True)
class SpectralShaper:
    """Positive function of the singular values, f: (0, inf) -> (0, inf)."""

    kind: str
    rho: Optional[float] = None
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.kind not in ("mf", "zf", "rzf", "custom"):
            raise ValueError(f"unknown shaper kind {self.kind!r}")
        if self.kind == "rzf":
            if self.rho is None or not self.rho > 0 or not np.isfinite(self.rho):
                raise ValueError("rzf shaper needs a positive finite rho")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom shaper needs a callable")

    @classmethod
    def mf(cls) -> "SpectralShaper":
        return cls(kind="mf")

    @classmethod
    def zf(cls) -> "SpectralShaper":
        return cls(kind="zf")

    @classmethod
    def rzf(cls, rho: float) -> "SpectralShaper":
        return cls(kind="rzf", rho=float(rho))

    @classmethod
    def custom(cls, fn: Callable) -> "SpectralShaper":
        return cls(kind="custom", fn=fn)

    @property
    def label(self) -> str:
        return self.kind

    def __call__(self, d):
        return shaper_eval(self, d)


def shaper_eval(f: SpectralShaper, d) -> np.ndarray:
    """Evaluate a shaper elementwise on singular values d > 0."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("singular values must be non-negative")
    if f.kind == "mf":
        out = d.copy()
    elif f.kind == "zf":
        if np.any(d == 0):
            raise ValueError("zero forcing undefined at d = 0")
        out = 1.0 / d
    elif f.kind == "rzf":
        out = d / (d * d + f.rho)
    else:
        out = np.asarray(f.fn(d), dtype=float)
        if out.shape != d.shape:
            raise ValueError("custom shaper changed the input shape")
        positive = d > 0
        if not np.all(np.isfinite(out[positive])) or np.any(out[positive] <= 0):
            raise ValueError("custom shaper must be positive and finite on d > 0")
    return out


def build_precoder(factors: SvdFactors, f: SpectralShaper) -> np.ndarray:
    """Assemble P = V f(D)^T U^H, an N x K matrix.

    Only the first K columns of V carry through f(D)^T; the orthogonal
    complement is annihilated.  Near-zero singular values are rejected for
    shapers that diverge there.
    """
    d = factors.d
    k = d.size
    tiny = d < DEGENERACY_CUTOFF * d[0]
    if np.any(tiny):
        idx = int(np.argmax(tiny))
        if f.kind == "zf":
            raise DegenerateChannelError(
                f"singular value {idx} is numerically zero; zero forcing diverges"
            )
        if f.kind == "custom":
            try:
                probe = f.fn(np.asarray([max(d[idx], np.finfo(float).tiny)]))
                diverges = not np.all(np.isfinite(probe))
            except (ZeroDivisionError, FloatingPointError, OverflowError):
                diverges = True
            if diverges:
                raise DegenerateChannelError(
                    f"singular value {idx} is numerically zero; custom shaper diverges"
                )
    fd = shaper_eval(f, d)
    return factors.v[:, :k] @ (fd[:, None] * factors.u.conj().T)


def rzf_direct(h: np.ndarray, rho: float) -> np.ndarray:
    """Regularized channel inverse P = H^H (H H^H + rho I)^{-1}.

    Solves the K x K Hermitian positive definite system rather than forming
    an inverse.  Equals the spectral construction with f(x) = x/(x^2+rho).
    """
    h = np.asarray(h)
    if h.ndim != 2:
        raise ValueError("expected a matrix")
    if rho < 0 or not np.isfinite(rho):
        raise ValueError("rho must be finite and >= 0")
    k = h.shape[0]
    gram = h @ h.conj().T + rho * np.eye(k)
    try:
        x = sla.solve(gram, np.eye(k, dtype=complex), assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise DegenerateChannelError(f"Gram matrix not positive definite: {exc}") from exc
    return h.conj().T @ x


def optimal_rho(gamma: float, sigma2: float) -> float:
    """Regularization level that maximizes the asymptotic post-decoding SNR.

    rho* = (1 - 2/pi + sigma2) / ((2/pi) * gamma).
    """
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if not sigma2 >= 0:
        raise ValueError("sigma2 must be >= 0")
    return (1.0 - TWO_OVER_PI + sigma2) / (TWO_OVER_PI * gamma)


def precoder_matrix(h: np.ndarray, f: SpectralShaper) -> np.ndarray:
    """Precoder for a given channel, taking the cheapest equivalent route.

    mf, zf, and rzf admit direct Gram-based forms (H^H, H^H (H H^H)^{-1},
    and the regularized inverse) that match the spectral construction
    exactly in exact arithmetic; custom shapers go through the SVD.
    """
    if f.kind == "mf":
        return h.conj().T
    if f.kind == "zf":
        return rzf_direct(h, 0.0)
    if f.kind == "rzf":
        return rzf_direct(h, f.rho)
    return build_precoder(svd(h), f)
