"""Command-line entry points: ``evstop analytic | simulate | fit | sweep | trend | oracle``.

Exit codes: 0 success, 2 usage or configuration error, 3 data or
feasibility error, 4 numerical non-convergence (output is still written).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from evstop import analytic as A
from evstop import simstudy as SS
from evstop.inference import (InfeasibleInitials, fit_trend, implied_k, mle,
                              profile_ci_return_level, return_level_estimate, trend_interval)
from evstop.likelihoods import LikelihoodKind, ModelSpec
from evstop.stopping import (HistoricalData, StoppedSample, StoppingRule, StdReturnLevel,
                             variable_thresholds)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NONCONV = 4

ANALYTIC_FIELDS = ("k", "std", "ex", "pc", "fc", "fc_se")
FIT_FIELDS = ("kind", "y", "estimate", "lo", "hi", "k_hat", "converged")
SWEEP_FIELDS = ("sweep", "kind", "estimate", "lo", "hi")
TREND_FIELDS = ("end_year", "model", "estimate", "lo", "hi", "slope", "slope_lo", "slope_hi")

SCHEMAS = {
    "analytic": ANALYTIC_FIELDS,
    "summary": SS.SUMMARY_FIELDS,
    "raw": SS.RAW_FIELDS,
    "fit": FIT_FIELDS,
    "sweep": SWEEP_FIELDS,
    "trend": TREND_FIELDS,
}
_STRING_COLUMNS = {"kind", "model"}
_INT_COLUMNS = {"n_fail", "n_rep", "rep", "end_year", "converged"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# --- parsing helpers -----------------------------------------------------------

def parse_floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def parse_kinds(text: str) -> tuple:
    try:
        return tuple(LikelihoodKind.parse(t).value for t in str(text).split(",") if t.strip())
    except ValueError as e:
        raise UsageError(str(e)) from None


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:steps`` into an evenly spaced grid."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"range must look like lo:hi:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad range {text!r}") from None
    if steps < 1 or hi < lo:
        raise UsageError(f"bad range {text!r}")
    return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])


def parse_rule(text: str):
    """``fixed:<c>`` or ``variable:<k>`` into ``(variant, values)``; values may be empty."""
    variant, _, rest = str(text).partition(":")
    variant = variant.strip().lower()
    if variant not in ("fixed", "variable"):
        raise UsageError(f"rule must be fixed:<c> or variable:<k>, got {text!r}")
    return variant, parse_floats(rest) if rest.strip() else ()


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys match the long flags."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


@dataclass(frozen=True)
class AnnualSeries:
    years: np.ndarray
    values: np.ndarray
    units: str = ""


def read_series(path: str) -> AnnualSeries:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"year", "value"} <= set(reader.fieldnames):
                raise DataError(f"{path}: header must contain year,value")
            years, values, units = [], [], ""
            for num, row in enumerate(reader, 2):
                try:
                    years.append(int(row["year"]))
                    values.append(float(row["value"]))
                except (TypeError, ValueError):
                    raise DataError(f"{path}:{num}: cannot parse year/value") from None
                units = units or (row.get("units") or "")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    y = np.asarray(years, dtype=np.int64)
    v = np.asarray(values, dtype=float)
    if y.size == 0:
        raise DataError(f"{path}: no rows")
    if np.any(np.diff(y) <= 0):
        raise DataError(f"{path}: years must be strictly increasing")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{path}: values must be finite")
    return AnnualSeries(y, v, units)


def write_csv(path: str, header: Sequence[str], rows) -> None:
    text = SS.rows_to_csv(header, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_csv_rows(path: str, schema: str) -> list:
    """Parse a CSV written by this tool back into typed rows."""
    header = SCHEMAS[schema]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != header:
            raise DataError(f"{path}: header does not match the {schema} schema")
        rows = []
        for row in reader:
            typed = {}
            for h in header:
                s = row[h]
                if h in _STRING_COLUMNS:
                    typed[h] = s
                elif h in _INT_COLUMNS:
                    typed[h] = int(s)
                else:
                    typed[h] = float(s)
            rows.append(typed)
    return rows


def _out_dir(path: Optional[str]) -> str:
    d = path or "."
    os.makedirs(d, exist_ok=True)
    return d


# --- case-study helpers -----------------------------------------------------------

def build_sample(series: AnnualSeries, n0: int, variant: str, level: float,
                 exempt_years=(), model: Optional[ModelSpec] = None) -> StoppedSample:
    """Split a series into historical and stopped parts and check the rule holds."""
    if series.years.size <= n0:
        raise DataError(f"need more than n0={n0} rows, got {series.years.size}")
    hist = HistoricalData(series.values[:n0], t=series.years[:n0].astype(float))
    obs = series.values[n0:]
    yrs = series.years[n0:]
    exempt = set()
    for year in exempt_years:
        idx = np.flatnonzero(yrs == int(year))
        if idx.size == 0:
            raise DataError(f"exempt year {int(year)} is not among the post-historical rows")
        exempt.add(int(idx[0]))
    if variant == "fixed":
        thr = np.full(obs.size, float(level))
        rule = StoppingRule.fixed(level)
    else:
        model = model or ModelSpec.gev()
        rule = StoppingRule.variable(level)
        probe = StoppedSample(hist, obs, np.append(np.full(obs.size - 1, np.inf), -np.inf),
                              rule)
        thr = variable_thresholds(probe, model, level, StdReturnLevel(model, level))
    if not obs[-1] > thr[-1]:
        raise DataError(f"final observation ({yrs[-1]}: {float(obs[-1])!r}) does not exceed the "
                        f"stopping threshold {float(thr[-1])!r}")
    for i in range(obs.size - 1):
        if obs[i] > thr[i] and i not in exempt:
            raise DataError(f"row for year {yrs[i]} ({float(obs[i])!r}) exceeds the stopping "
                            f"threshold {float(thr[i])!r}; mark it with --exempt or change the rule")
    return StoppedSample(hist, obs, thr, rule, exempt=frozenset(exempt),
                         t_obs=yrs.astype(float))


def _fit_kind(sample, model, kind, ys, confidence):
    fit = mle(sample, model, kind)
    est = np.asarray(return_level_estimate(fit, np.asarray(ys)), dtype=float)
    cis = [profile_ci_return_level(sample, model, kind, y, confidence, fit=fit) for y in ys]
    return fit, est, cis


# --- commands ------------------------------------------------------------------------

def cmd_analytic(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required")
    lo, hi, steps = args.k_range
    ks = np.exp(np.linspace(math.log(lo), math.log(hi), steps)) if steps > 1 else np.array([lo])
    if args.k:
        ks = np.unique(np.concatenate([ks, np.asarray(parse_floats(args.k))]))
    rows = []
    for i, k in enumerate(ks):
        a = math.log(k)
        fc, se = A.relbias_fc_mc(a, args.reps, seed=int(args.seed) + i)
        rows.append(dict(k=float(k), std=A.relbias_std(a), ex=A.relbias_ex(a), pc=A.relbias_pc(a),
                         fc=fc, fc_se=se))
    path = os.path.join(_out_dir(args.out), "analytic.csv")
    write_csv(path, ANALYTIC_FIELDS, rows)
    print(path)
    return EXIT_OK


_SIM_KEYS = {
    "family": str, "xi": float, "mu": float, "sigma": float, "beta": float, "alpha": float,
    "rule": str, "k": str, "kinds": str, "y": str, "n0": int, "seed": int, "reps": int,
    "coverage_reps": int, "trim": float, "historical": str, "idealized": str,
    "exceed_rate": float, "counts": str, "confidence": float, "workers": int, "out": str,
}


def simconfig_from(settings: dict) -> SS.SimConfig:
    unknown = set(settings) - set(_SIM_KEYS)
    if unknown:
        raise UsageError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
    vals = {}
    for key, conv in _SIM_KEYS.items():
        if settings.get(key) is None:
            continue
        try:
            vals[key] = conv(settings[key])
        except ValueError:
            raise UsageError(f"bad value for {key}: {settings[key]!r}") from None
    if "seed" not in vals:
        raise UsageError("a seed is required (--seed or seed = ... in the config)")
    family = vals.get("family", "gev")
    names = {"gev": ("mu", "sigma", "xi"), "gpd": ("xi",), "exp": ("beta",),
             "gamma": ("alpha", "beta")}.get(family)
    if names is None:
        raise UsageError(f"unknown family {family!r}")
    params = {n: vals[n] for n in names if n in vals}
    rule = "fixed"
    k_grid = (20.0, 100.0, 500.0)
    if "rule" in vals:
        rule, levels = parse_rule(vals["rule"])
        if levels:
            k_grid = levels
    if "k" in vals:
        k_grid = parse_floats(vals["k"])
    kw = dict(family=family, params=params, rule=rule, k_grid=k_grid, seed=vals["seed"])
    if "kinds" in vals:
        kw["kinds"] = parse_kinds(vals["kinds"])
    if "y" in vals:
        kw["y_values"] = parse_floats(vals["y"])
    for key in ("n0", "reps", "coverage_reps", "trim", "historical", "exceed_rate", "counts",
                "confidence"):
        if key in vals:
            kw[key] = vals[key]
    if "idealized" in vals:
        kw["idealized"] = str(vals["idealized"]).strip().lower() in ("1", "true", "yes", "on")
    try:
        return SS.SimConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None



def cmd_simulate(args) -> int:
    settings = read_config(args.config) if args.config else {}
    for key in _SIM_KEYS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            settings[key] = val
    config = simconfig_from(settings)
    workers = int(settings.get("workers", 1) or 1)
    summary, raw = SS.run_study(config, workers=workers)
    out = _out_dir(settings.get("out"))
    write_csv(os.path.join(out, "summary.csv"), SS.SUMMARY_FIELDS,
              [vars(r) for r in summary.rows])
    write_csv(os.path.join(out, "raw.csv"), SS.RAW_FIELDS, raw)
    for note in summary.notes:
        print(f"note: {note}", file=sys.stderr)
    dead = [r for r in summary.rows if r.n_fail == r.n_rep]
    if dead:
        print(f"warning: {len(dead)} cell(s) had no converged fits", file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


def _rule_from_args(args):
    if not args.rule:
        raise UsageError("--rule is required")
    variant, levels = parse_rule(args.rule)
    return variant, levels


def cmd_fit(args) -> int:
    series = read_series(args.data)
    variant, levels = _rule_from_args(args)
    if len(levels) != 1:
        raise UsageError("fit needs a single rule level, e.g. --rule fixed:1568")
    level = levels[0]
    ys = parse_floats(args.y)
    kinds = parse_kinds(args.kinds)
    model = ModelSpec.gev()
    sample = build_sample(series, args.n0, variant, level, parse_floats(args.exempt or ""), model)
    c_eff = level if variant == "fixed" else float(sample.thresholds[-1])
    rows, bad = [], False
    for kind in kinds:
        try:
            fit, est, cis = _fit_kind(sample, model, kind, ys, args.confidence)
        except (InfeasibleInitials, ValueError) as e:
            raise DataError(f"{kind}: {e}") from None
        bad = bad or not fit.converged
        try:
            khat = implied_k(c_eff, fit)
        except ValueError:
            khat = float("nan")
        for y, e, ci in zip(ys, est, cis):
            rows.append(dict(kind=kind, y=y, estimate=float(e), lo=ci.lower, hi=ci.upper,
                             k_hat=khat, converged=int(fit.converged)))
    path = os.path.join(_out_dir(args.out), "fit.csv")
    write_csv(path, FIT_FIELDS, rows)
    print(path)
    return EXIT_NONCONV if bad else EXIT_OK


def _monotone_warning(rows, kind):
    vals = [r["estimate"] for r in rows if r["kind"] == kind]
    if any(b > a + 1e-9 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:])):
        print(f"warning: {kind} estimates are not non-increasing across the sweep",
              file=sys.stderr)


def cmd_sweep(args) -> int:
    series = read_series(args.data)
    variant, levels = _rule_from_args(args)
    if args.sweep:
        grid = parse_range(args.sweep)
    elif levels:
        grid = np.asarray(levels)
    else:
        raise UsageError("give --sweep lo:hi:steps or list levels in --rule")
    ys = parse_floats(args.y)
    if len(ys) != 1:
        raise UsageError("sweep takes exactly one return period in --y")
    y = ys[0]
    kinds = parse_kinds(args.kinds)
    model = ModelSpec.gev()
    exempt = parse_floats(args.exempt or "")
    rows, bad = [], False
    for level in grid:
        sample = build_sample(series, args.n0, variant, float(level), exempt, model)
        for kind in kinds:
            try:
                fit, est, cis = _fit_kind(sample, model, kind, (y,), args.confidence)
            except (InfeasibleInitials, ValueError) as e:
                raise DataError(f"{kind} at {level!r}: {e}") from None
            bad = bad or not fit.converged
            rows.append(dict(sweep=float(level), kind=kind, estimate=float(est[0]),
                             lo=cis[0].lower, hi=cis[0].upper))
    for kind in ("fc", "pc"):
        if kind in kinds:
            _monotone_warning(rows, kind)
    path = os.path.join(_out_dir(args.out), "sweep.csv")
    write_csv(path, SWEEP_FIELDS, rows)
    print(path)
    return EXIT_NONCONV if bad else EXIT_OK


def cmd_trend(args) -> int:
    series = read_series(args.data)
    ys = parse_floats(args.y)
    if len(ys) != 1:
        raise UsageError("trend takes exactly one return period in --y")
    y = ys[0]
    min_len = 15
    if series.years.size < min_len:
        raise DataError(f"trend analysis needs at least {min_len} years, got {series.years.size}")
    rows, bad = [], False
    nan = float("nan")
    first = int(series.years[0])
    for w in series.years:
        if w < first + min_len - 1:
            continue
        keep = series.years <= w
        yrs, vals = series.years[keep].astype(float), series.values[keep]
        fit0 = mle(vals, ModelSpec.gev())
        ci0 = profile_ci_return_level(vals, ModelSpec.gev(), "std", y, args.confidence, fit=fit0)
        rows.append(dict(end_year=int(w), model="none", estimate=float(return_level_estimate(fit0, y)),
                         lo=ci0.lower, hi=ci0.upper, slope=nan, slope_lo=nan, slope_hi=nan))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tf, level = fit_trend(yrs, vals, y, eval_year=float(w))
        ci1 = trend_interval(tf, yrs, vals, y, float(w), args.confidence)
        lo_b, hi_b = tf.beta_ci if tf.beta_ci is not None else (nan, nan)
        rows.append(dict(end_year=int(w), model="trend", estimate=level, lo=ci1.lower,
                         hi=ci1.upper, slope=tf.beta_trend, slope_lo=lo_b, slope_hi=hi_b))
        bad = bad or not (fit0.converged and tf.converged)
    path = os.path.join(_out_dir(args.out), "trend.csv")
    write_csv(path, TREND_FIELDS, rows)
    print(path)
    return EXIT_NONCONV if bad else EXIT_OK


_ORACLES = ("relbias_std", "relbias_ex", "relbias_pc", "relbias_fc_mc", "expected_inv_N",
            "exp_mean_stopped", "exp_truncated_mean")


def cmd_oracle(args) -> int:
    which = args.which

    def need(name):
        v = getattr(args, name)
        if v is None:
            raise UsageError(f"{which} needs --{name.replace('_', '-')}")
        return v

    if which in ("relbias_std", "relbias_ex", "relbias_pc"):
        a = args.a if args.a is not None else (math.log(args.k) if args.k else None)
        if a is None:
            raise UsageError(f"{which} needs --a or --k")
        value = getattr(A, which)(a)
        print(repr(float(value)))
    elif which == "relbias_fc_mc":
        a = args.a if args.a is not None else (math.log(args.k) if args.k else None)
        if a is None:
            raise UsageError(f"{which} needs --a or --k")
        est, se = A.relbias_fc_mc(a, args.reps, seed=need("seed"))
        print(f"{est!r} {se!r}")
    elif which == "expected_inv_N":
        print(repr(float(A.expected_inv_N(need("fbar")))))
    else:
        print(repr(float(getattr(A, which)(need("beta"), need("c")))))
    return EXIT_OK


# --- argument parser ---------------------------------------------------------------------

def _k_range(text):
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError("k range must look like lo:hi:steps") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evstop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", help="relative-bias curves for exponential data")
    a.add_argument("--k-range", type=_k_range, default=(2.0, 2000.0, 31),
                   help="log-spaced grid lo:hi:steps (default 2:2000:31)")
    a.add_argument("--k", help="extra k values to include, comma separated")
    a.add_argument("--reps", type=int, default=10_000)
    a.add_argument("--seed", type=int)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analytic)

    s = sub.add_parser("simulate", help="Monte Carlo study from a config file and/or flags")
    s.add_argument("--config")
    s.add_argument("--family", choices=SS.FAMILIES)
    for name in ("xi", "mu", "sigma", "beta", "alpha", "trim", "exceed-rate", "confidence"):
        s.add_argument(f"--{name}", type=float)
    s.add_argument("--rule", help="fixed or variable, optionally with a k list: fixed:20,100")
    s.add_argument("--k", help="k grid, comma separated")
    s.add_argument("--kinds")
    s.add_argument("--y")
    for name in ("n0", "seed", "reps", "coverage-reps", "workers"):
        s.add_argument(f"--{name}", type=int)
    s.add_argument("--historical", choices=SS.HISTORICAL)
    s.add_argument("--counts", choices=("poisson", "fixed"))
    s.add_argument("--idealized", action="store_const", const="true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    def case(name, func, helptext):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--data", required=True)
        c.add_argument("--kinds", default="std,ex,fc,pc")
        c.add_argument("--y", default="200")
        c.add_argument("--n0", type=int, default=10)
        c.add_argument("--exempt", help="years allowed to exceed the threshold, comma separated")
        c.add_argument("--confidence", type=float, default=0.95)
        c.add_argument("--out")
        c.set_defaults(func=func)
        return c

    f = case("fit", cmd_fit, "fit a stopped annual-maxima series")
    f.add_argument("--rule", required=True, help="fixed:<c> or variable:<k>")
    w = case("sweep", cmd_sweep, "estimates over a range of thresholds or return periods")
    w.add_argument("--rule", required=True, help="fixed or variable")
    w.add_argument("--sweep", help="lo:hi:steps")
    t = sub.add_parser("trend", help="fits with and without a linear trend in location")
    t.add_argument("--data", required=True)
    t.add_argument("--y", default="200")
    t.add_argument("--confidence", type=float, default=0.95)
    t.add_argument("--out")
    t.set_defaults(func=cmd_trend)

    o = sub.add_parser("oracle", help="print an analytic value")
    o.add_argument("which", choices=_ORACLES)
    o.add_argument("--a", type=float)
    o.add_argument("--k", type=float)
    o.add_argument("--fbar", type=float)
    o.add_argument("--beta", type=float)
    o.add_argument("--c", type=float)
    o.add_argument("--reps", type=int, default=100_000)
    o.add_argument("--seed", type=int)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
