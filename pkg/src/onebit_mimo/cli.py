"""Command line front end.

Subcommands: asymptotic, simulate, sweep, optimal, equivalence, haar-test.
Exit codes: 0 on success, 1 on usage or domain errors, 2 when a --check
style acceptance run fails.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import asymptotics as asym
from .channel import SystemConfig
from .equivalence import (convergence_report, direct_model_samples,
                          distribution_match_test, equivalent_model_samples,
                          haar_sample, hd_model_samples)
from .montecarlo import estimate_ser
from .numerics import RngStream
from .precoding import DegenerateChannelError, SpectralShaper, optimal_rho

CSV_HEADER = "gamma,K,N,sigma2,snr_db,precoder,ser_sim,ci_low,ci_high,ser_asym,trials,seed"

_DEFAULTS = {
    "trials": 1000,
    "seed": 0,
    "channel_mode": "per_trial",
    "samples": 10000,
    "draws": 20,
    "size": 16,
    "format": None,
}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _round9(x):
    if isinstance(x, float) and math.isfinite(x):
        return float(f"{x:.9g}")
    return x


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad numeric list {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="onebit-mimo",
                     description="one-bit precoded downlink analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gamma", "-g", type=float, default=None,
                        help="antenna-to-user ratio N/K")
    common.add_argument("--users", "-K", type=int, default=None,
                        help="number of single-antenna users K")
    common.add_argument("--sigma2", type=float, default=None,
                        help="per-user noise variance")
    common.add_argument("--snr-db", dest="snr_db", type=float, default=None,
                        help="transmit SNR 1/sigma2 in dB (alternative to --sigma2)")
    common.add_argument("--precoder", type=str, default=None,
                        help="comma list from mf,zf,rzf,opt")
    common.add_argument("--rho", type=float, default=None,
                        help="regularization for the rzf precoder")
    common.add_argument("--trials", type=int, default=None,
                        help="Monte Carlo trials per operating point")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--output", type=str, default=None,
                        help="write results to this file instead of stdout")
    common.add_argument("--format", choices=("csv", "json", "text"),
                        default=None, help="output format")
    common.add_argument("--config", type=str, default=None,
                        help="JSON file with defaults for any long flag")

    p = sub.add_parser("asymptotic", parents=[common],
                       help="large-system constants for one shaper")
    p.set_defaults(func=cmd_asymptotic)

    for name, need_grid in (("simulate", False), ("sweep", True)):
        p = sub.add_parser(name, parents=[common],
                           help="Monte Carlo SER rows (CSV by default)")
        p.add_argument("--variable", choices=("gamma", "snr-db"), default=None,
                       help="sweep variable; omit for a single point")
        p.add_argument("--grid", type=_float_list, default=None,
                       help="comma list of sweep values")
        p.add_argument("--channel-mode", dest="channel_mode",
                       choices=("per_trial", "fixed"), default=None)
        p.set_defaults(func=cmd_simulate, require_grid=need_grid)

    p = sub.add_parser("optimal", parents=[common],
                       help="optimal regularization and its SNR, two routes")
    p.set_defaults(func=cmd_optimal)

    p = sub.add_parser("equivalence", parents=[common],
                       help="distribution match of the reduced models")
    p.add_argument("--samples", type=int, default=None,
                   help="pooled per-user samples per side")
    p.add_argument("--sizes", type=_int_list, default=None,
                   help="user counts for the coefficient convergence table")
    p.add_argument("--draws", type=int, default=None,
                   help="draws per size in the convergence table")
    p.add_argument("--check", action="store_true",
                   help="exit 2 unless every comparison passes")
    p.set_defaults(func=cmd_equivalence)

    p = sub.add_parser("haar-test", parents=[common],
                       help="statistical checks of the Haar unitary sampler")
    p.add_argument("--size", type=int, default=None, help="matrix dimension")
    p.add_argument("--draws", type=int, default=None, help="number of draws")
    p.add_argument("--check", action="store_true",
                   help="exit 2 unless every check passes")
    p.set_defaults(func=cmd_haar_test)

    return parser


def _merge_config(ns: argparse.Namespace) -> argparse.Namespace:
    if getattr(ns, "config", None):
        with open(ns.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        for key, value in loaded.items():
            attr = key.replace("-", "_")
            if not hasattr(ns, attr):
                raise ValueError(f"config key {key!r} is not a known flag")
            if getattr(ns, attr) in (None, False):
                if attr == "grid" and isinstance(value, str):
                    value = _float_list(value)
                if attr == "sizes" and isinstance(value, str):
                    value = _int_list(value)
                setattr(ns, attr, value)
    for key, value in _DEFAULTS.items():
        if hasattr(ns, key) and getattr(ns, key) is None:
            setattr(ns, key, value)
    return ns


def _noise_variance(ns) -> float:
    if ns.sigma2 is not None and ns.snr_db is not None:
        raise ValueError("give either --sigma2 or --snr-db, not both")
    if ns.snr_db is not None:
        return 10.0 ** (-ns.snr_db / 10.0)
    if ns.sigma2 is None:
        raise ValueError("need --sigma2 or --snr-db")
    if ns.sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    return ns.sigma2


def _snr_db_of(sigma2: float) -> float:
    if sigma2 == 0:
        return math.inf
    return -10.0 * math.log10(sigma2) + 0.0  # "+ 0.0" normalizes -0.0


def _shaper_for(label: str, gamma: float, sigma2: float,
                rho: Optional[float]) -> SpectralShaper:
    if label == "mf":
        return SpectralShaper.mf()
    if label == "zf":
        return SpectralShaper.zf()
    if label == "opt":
        return SpectralShaper.rzf(optimal_rho(gamma, sigma2))
    if label == "rzf":
        if rho is None:
            raise ValueError("rzf precoder needs --rho")
        return SpectralShaper.rzf(rho)
    raise ValueError(f"unknown precoder {label!r}")


def _precoder_labels(ns) -> list[str]:
    if not ns.precoder:
        raise ValueError("need --precoder")
    labels = [tok.strip() for tok in ns.precoder.split(",") if tok.strip()]
    for lab in labels:
        if lab not in ("mf", "zf", "rzf", "opt"):
            raise ValueError(f"unknown precoder {lab!r}")
    return labels


def _emit(ns, text: str) -> None:
    if ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_kv(ns, pairs: list[tuple[str, object]]) -> None:
    if ns.format == "json":
        obj = {k: _round9(v) if isinstance(v, float) else v for k, v in pairs}
        _emit(ns, json.dumps(obj, indent=2) + "\n")
    else:
        width = max(len(k) for k, _ in pairs)
        _emit(ns, "".join(f"{k:<{width}}  {_fmt(v)}\n" for k, v in pairs))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_asymptotic(ns) -> int:
    if ns.gamma is None:
        raise ValueError("need --gamma")
    sigma2 = _noise_variance(ns)
    labels = _precoder_labels(ns)
    if len(labels) != 1:
        raise ValueError("asymptotic takes exactly one precoder")
    label = labels[0]
    shaper = _shaper_for(label, ns.gamma, sigma2, ns.rho)
    const = asym.asymptotic_constants(shaper, ns.gamma, sigma2)
    pairs = [("precoder", label), ("gamma", ns.gamma), ("sigma2", sigma2),
             ("t_s", const.t_s), ("t_g", const.t_g), ("snr", const.snr),
             ("snr_db", 10.0 * math.log10(const.snr)), ("sep", const.sep)]
    if label in ("opt", "rzf"):
        pairs.insert(3, ("rho", shaper.rho))
    _emit_kv(ns, pairs)
    return 0


@dataclass(frozen=True)
class SweepSpec:
    """One resolved simulation request: grid points x precoders."""

    variable: Optional[str]
    grid: tuple
    users: int
    gamma: Optional[float]
    sigma2: Optional[float]
    precoder_labels: tuple
    rho: Optional[float]
    trials: int
    seed: int
    channel_mode: str

    def points(self):
        if self.variable is None:
            yield self.gamma, self.sigma2
        elif self.variable == "gamma":
            for g in self.grid:
                yield g, self.sigma2
        else:
            for db in self.grid:
                yield self.gamma, 10.0 ** (-db / 10.0)


def _spec_from_args(ns) -> SweepSpec:
    if ns.users is None:
        raise ValueError("need --users")
    variable = getattr(ns, "variable", None)
    grid = getattr(ns, "grid", None)
    if getattr(ns, "require_grid", False) and variable is None:
        raise ValueError("sweep needs --variable and --grid")
    if (variable is None) != (grid is None):
        raise ValueError("--variable and --grid go together")
    if variable == "snr-db":
        variable = "snr_db"
    sigma2 = None
    if variable == "gamma":
        sigma2 = _noise_variance(ns)
        if ns.gamma is not None:
            raise ValueError("--gamma conflicts with sweeping gamma")
    elif variable == "snr_db":
        if ns.gamma is None:
            raise ValueError("need --gamma when sweeping snr-db")
        if ns.sigma2 is not None or ns.snr_db is not None:
            raise ValueError("fixed noise flags conflict with sweeping snr-db")
    else:
        if ns.gamma is None:
            raise ValueError("need --gamma")
        sigma2 = _noise_variance(ns)
    if ns.trials < 1:
        raise ValueError("trials must be >= 1")
    return SweepSpec(variable=variable, grid=tuple(grid or ()),
                     users=ns.users, gamma=ns.gamma, sigma2=sigma2,
                     precoder_labels=tuple(_precoder_labels(ns)), rho=ns.rho,
                     trials=ns.trials, seed=ns.seed,
                     channel_mode=ns.channel_mode)


def sweep_rows(spec: SweepSpec) -> list[dict]:
    """One row per (grid point, precoder), in deterministic order."""
    rows = []
    for gamma, sigma2 in spec.points():
        n_float = gamma * spec.users
        n = round(n_float)
        if abs(n_float - n) > 1e-9 or n <= spec.users:
            raise ValueError(
                f"gamma*K must be an integer above K (gamma={gamma}, K={spec.users})")
        cfg = SystemConfig(n_antennas=n, n_users=spec.users,
                           noise_variance=sigma2, seed=spec.seed)
        for label in spec.precoder_labels:
            shaper = _shaper_for(label, gamma, sigma2, spec.rho)
            est = estimate_ser(cfg, shaper, spec.trials,
                               channel_mode=spec.channel_mode)
            const = asym.asymptotic_constants(shaper, gamma, sigma2)
            rows.append({
                "gamma": gamma, "K": spec.users, "N": n, "sigma2": sigma2,
                "snr_db": _snr_db_of(sigma2), "precoder": label,
                "ser_sim": est.ser, "ci_low": est.ci_low,
                "ci_high": est.ci_high, "ser_asym": const.sep,
                "trials": spec.trials, "seed": spec.seed,
            })
    return rows


def cmd_simulate(ns) -> int:
    spec = _spec_from_args(ns)
    rows = sweep_rows(spec)
    fmt = ns.format or "csv"
    if fmt == "json":
        payload = [{k: _round9(v) for k, v in row.items()} for row in rows]
        _emit(ns, json.dumps(payload, indent=2) + "\n")
    else:
        lines = [CSV_HEADER]
        for row in rows:
            lines.append(",".join(_fmt(row[col]) for col in CSV_HEADER.split(",")))
        _emit(ns, "\n".join(lines) + "\n")
    return 0


def cmd_optimal(ns) -> int:
    if ns.gamma is None:
        raise ValueError("need --gamma")
    sigma2 = _noise_variance(ns)
    rho = optimal_rho(ns.gamma, sigma2)
    closed = asym.snr_opt_closed(ns.gamma, sigma2)
    quad = asym.asymptotic_constants(asym.optimal_shaper(ns.gamma, sigma2),
                                     ns.gamma, sigma2).snr
    zf = asym.snr_zf_closed(ns.gamma, sigma2)
    pairs = [
        ("gamma", ns.gamma), ("sigma2", sigma2), ("rho", rho),
        ("snr_opt_closed", closed), ("snr_opt_quadrature", quad),
        ("closed_vs_quadrature_gap", abs(closed - quad)),
        ("snr_zf", zf), ("opt_over_zf", closed / zf),
        ("sep_opt", asym.asymptotic_sep(closed)),
        ("snr_naive_form", asym.snr_opt_naive(ns.gamma, sigma2)),
        ("note", "naive_form uses an inconsistent parametrization and "
                 "disagrees with the quadrature optimum; snr_opt_closed "
                 "is the trusted value"),
    ]
    _emit_kv(ns, pairs)
    return 0


def cmd_equivalence(ns) -> int:
    if ns.gamma is None or ns.users is None:
        raise ValueError("need --gamma and --users")
    sigma2 = _noise_variance(ns)
    labels = _precoder_labels(ns) if ns.precoder else ["zf"]
    if len(labels) != 1:
        raise ValueError("equivalence takes exactly one precoder")
    shaper = _shaper_for(labels[0], ns.gamma, sigma2, ns.rho)
    n_float = ns.gamma * ns.users
    n = round(n_float)
    if abs(n_float - n) > 1e-9 or n <= ns.users:
        raise ValueError("gamma*K must be an integer above K")
    cfg = SystemConfig(n_antennas=n, n_users=ns.users, noise_variance=sigma2,
                       seed=ns.seed)
    draws = max(1, -(-ns.samples // ns.users))

    direct = direct_model_samples(cfg, shaper, draws)
    reports = {
        "direct_vs_equivalent": distribution_match_test(
            direct, equivalent_model_samples(cfg, shaper, draws)),
        "direct_vs_iterative": distribution_match_test(
            direct, hd_model_samples(cfg, shaper, draws)),
    }
    all_pass = all(rep.passed for rep in reports.values())

    conv_rows = None
    conv_pass = True
    if ns.sizes:
        cfgs = []
        for k in ns.sizes:
            nk = round(ns.gamma * k)
            if abs(ns.gamma * k - nk) > 1e-9:
                raise ValueError(f"gamma*K must be an integer (K={k})")
            cfgs.append(SystemConfig(n_antennas=nk, n_users=k,
                                     noise_variance=sigma2, seed=ns.seed))
        conv_rows = convergence_report(cfgs, shaper, draws_per_size=ns.draws)
        medians = [row.median_ts_err for row in conv_rows]
        inversions = sum(1 for x, y in zip(medians, medians[1:]) if y > x)
        conv_pass = medians[-1] < 0.02 and inversions <= 1

    ok = all_pass and conv_pass
    if ns.format == "json":
        obj = {
            "users": ns.users, "gamma": ns.gamma, "sigma2": _round9(sigma2),
            "precoder": labels[0], "samples_per_side": draws * ns.users,
            "matches": {
                name: {
                    "passed": rep.passed,
                    "tests": {t: {"statistic": _round9(res.statistic),
                                  "p_value": _round9(res.p_value),
                                  "passed": res.passed}
                              for t, res in rep.tests.items()},
                } for name, rep in reports.items()
            },
            "check": ok,
        }
        if conv_rows is not None:
            obj["convergence"] = [
                {"K": row.n_users, "d_source": row.d_source,
                 "median_ts_err": _round9(row.median_ts_err),
                 "max_ts_err": _round9(row.max_ts_err),
                 "median_tg_err": _round9(row.median_tg_err),
                 "max_tg_err": _round9(row.max_tg_err)}
                for row in conv_rows]
        _emit(ns, json.dumps(obj, indent=2) + "\n")
    else:
        lines = [f"users {ns.users}", f"gamma {_fmt(ns.gamma)}",
                 f"sigma2 {_fmt(sigma2)}", f"precoder {labels[0]}",
                 f"samples_per_side {draws * ns.users}"]
        for name, rep in reports.items():
            lines.append(f"{name} {'pass' if rep.passed else 'FAIL'}")
            for t, res in rep.tests.items():
                lines.append(f"  {t} statistic {_fmt(res.statistic)} "
                             f"p {_fmt(res.p_value)} "
                             f"{'pass' if res.passed else 'FAIL'}")
        if conv_rows is not None:
            lines.append("convergence (relative deviation of t_s, t_g)")
            for row in conv_rows:
                lines.append(
                    f"  K {row.n_users} source {row.d_source} "
                    f"median_ts {_fmt(row.median_ts_err)} "
                    f"max_ts {_fmt(row.max_ts_err)} "
                    f"median_tg {_fmt(row.median_tg_err)} "
                    f"max_tg {_fmt(row.max_tg_err)}")
        lines.append(f"check {'pass' if ok else 'FAIL'}")
        _emit(ns, "\n".join(lines) + "\n")
    return 0 if (ok or not ns.check) else 2


def cmd_haar_test(ns) -> int:
    m = ns.size
    if m < 1:
        raise ValueError("size must be >= 1")
    if ns.draws < 100:
        raise ValueError("need at least 100 draws")

    unit_dev = 0.0
    for j in range(min(ns.draws, 64)):
        q = haar_sample(m, RngStream(ns.seed, 10_000 + j))
        unit_dev = max(unit_dev, float(np.abs(
            q.conj().T @ q - np.eye(m)).max()))
    unit_ok = unit_dev < 1e-10

    first = np.empty(ns.draws, dtype=complex)
    rotated = np.empty(ns.draws, dtype=complex)
    fourier = np.exp(-2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m) \
        / math.sqrt(m)
    for j in range(ns.draws):
        col = haar_sample(m, RngStream(ns.seed, j))[:, 0]
        first[j] = col[0]
        col2 = haar_sample(m, RngStream(ns.seed, 200_000 + j))[:, 0]
        rotated[j] = (fourier @ col2)[0]

    sq = np.abs(first) ** 2
    z = (sq.mean() - 1.0 / m) / (sq.std(ddof=1) / math.sqrt(ns.draws))
    moment_ok = abs(z) < 3.0

    from scipy import stats
    ks_re = stats.ks_2samp(first.real, rotated.real)
    ks_im = stats.ks_2samp(first.imag, rotated.imag)
    inv_ok = ks_re.pvalue >= 0.005 and ks_im.pvalue >= 0.005

    ok = unit_ok and moment_ok and inv_ok
    pairs = [
        ("size", m), ("draws", ns.draws), ("seed", ns.seed),
        ("unitarity_max_dev", unit_dev),
        ("first_entry_sq_mean", float(sq.mean())),
        ("first_entry_sq_expected", 1.0 / m),
        ("moment_zscore", float(z)),
        ("invariance_ks_real_p", float(ks_re.pvalue)),
        ("invariance_ks_imag_p", float(ks_im.pvalue)),
        ("check", "pass" if ok else "FAIL"),
    ]
    _emit_kv(ns, pairs)
    return 0 if (ok or not ns.check) else 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        ns = _merge_config(ns)
        return ns.func(ns)
    except (ValueError, OSError, RuntimeError, DegenerateChannelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
