"""Monte Carlo symbol error rate estimation for the one-bit downlink.

Every trial owns an independent substream derived from (cfg.seed, trial
index), so results are bit-identical no matter how trials are scheduled or
how many worker processes run them.  The ONEBIT_THREADS environment variable
caps the worker count.
"""
from __future__ import annotations

import math
import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .channel import SystemConfig, sample_channel, sample_symbols, one_bit_quantize
from .numerics import RngStream, as_generator, complex_normal
from .precoding import SpectralShaper, precoder_matrix

THREADS_ENV = "ONEBIT_THREADS"


@dataclass(frozen=True)
class SerEstimate:
    """Pooled and per-user symbol error statistics with a Wilson interval."""

    ser: float
    symbol_errors: int
    symbols_tested: int
    ci_low: float
    ci_high: float
    per_user_ser: np.ndarray


def transmit_once(h: np.ndarray, p: np.ndarray, s: np.ndarray, sigma2: float,
                  rng) -> np.ndarray:
    """One use of the quantized downlink: y = H q(P s) + n.

    The noise n is entrywise CN(0, sigma2); sigma2 = 0 gives a noiseless
    link (the noise draw still advances the stream so symbol sequences
    stay aligned across noise levels).
    """
    h = np.asarray(h)
    p = np.asarray(p)
    s = np.asarray(s)
    k, n = h.shape
    if p.shape != (n, k):
        raise ValueError(f"precoder shape {p.shape} does not match channel {h.shape}")
    if s.shape != (k,):
        raise ValueError(f"symbol vector length {s.shape} does not match K={k}")
    if not sigma2 >= 0:
        raise ValueError("sigma2 must be >= 0")
    gen = as_generator(rng)
    noise = math.sqrt(sigma2) * complex_normal(gen, k)
    return h @ one_bit_quantize(p @ s) + noise


def _trial_error_flags(cfg: SystemConfig, f: SpectralShaper, gen,
                       h=None, p=None) -> np.ndarray:
    if h is None:
        h = sample_channel(cfg, gen)
        p = precoder_matrix(h, f)
    s = sample_symbols(cfg.n_users, gen)
    y = transmit_once(h, p, s, cfg.noise_variance, gen)
    bad = (y.real >= 0) != (s.real > 0)
    bad |= (y.imag >= 0) != (s.imag > 0)
    return bad


def _run_chunk(payload) -> np.ndarray:
    cfg, f, start, stop, h, p = payload
    errors = np.zeros(cfg.n_users, dtype=np.int64)
    for trial in range(start, stop):
        gen = RngStream(cfg.seed, trial + 1).generator()
        errors += _trial_error_flags(cfg, f, gen, h, p)
    return errors


def _resolve_workers(workers) -> int:
    if workers is None:
        env = os.environ.get(THREADS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    else:
        cap = os.environ.get(THREADS_ENV)
        if cap:
            workers = min(int(workers), int(cap))
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def estimate_ser(cfg: SystemConfig, f: SpectralShaper, trials: int,
                 channel_mode: str = "per_trial", workers=None) -> SerEstimate:
    """Estimate the pooled SER over `trials` channel uses of K symbols each.

    channel_mode "per_trial" draws a fresh channel (and precoder) every
    trial; "fixed" reuses a single channel drawn from substream 0.  Trial i
    always consumes substream i + 1, which is what makes the estimate
    invariant to the worker count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if channel_mode not in ("per_trial", "fixed"):
        raise ValueError(f"unknown channel_mode {channel_mode!r}")

    h = p = None
    if channel_mode == "fixed":
        h = sample_channel(cfg, RngStream(cfg.seed, 0))
        p = precoder_matrix(h, f)

    workers = _resolve_workers(workers)
    payload_head = (cfg, f, h, p)
    if workers > 1:
        try:
            pickle.dumps(payload_head)
        except Exception:
            workers = 1  # unpicklable custom shaper: run in-process

    per_user = np.zeros(cfg.n_users, dtype=np.int64)
    if workers == 1 or trials < 2 * workers:
        per_user = _run_chunk((cfg, f, 0, trials, h, p))
    else:
        bounds = np.linspace(0, trials, workers + 1, dtype=int)
        chunks = [(cfg, f, int(a), int(b), h, p)
                  for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, chunks):
                per_user += part

    symbols = trials * cfg.n_users
    errors = int(per_user.sum())
    lo, hi = confidence_interval(errors, symbols)
    return SerEstimate(
        ser=errors / symbols,
        symbol_errors=errors,
        symbols_tested=symbols,
        ci_low=lo,
        ci_high=hi,
        per_user_ser=per_user / trials,
    )


def confidence_interval(k: int, n: int, confidence: float = 0.95):
    """Wilson score interval for a binomial proportion.

    Degenerate counts behave sensibly: k = 0 gives a lower end of exactly
    0 and k = n an upper end of exactly 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = special.ndtri(0.5 + confidence / 2.0)
    z2 = z * z
    phat = k / n
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi
