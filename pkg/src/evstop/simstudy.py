"""Monte Carlo bias, RRMSE and coverage studies for stopped samples.

Replicate ``r`` of the cell with return period ``k`` draws from its own
stream ``SeedSequence([seed, round(k * 1e6), r])``, so every replicate can
be regenerated in isolation, all likelihood kinds see identical data, and
results do not depend on how work is split across processes.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from evstop import analytic
from evstop import distributions as D
from evstop import stopping as S
from evstop.inference import (InfeasibleInitials, mle, profile_ci_return_level,
                              return_level_estimate)
from evstop.likelihoods import LikelihoodKind, ModelSpec

FAMILIES = ("gev", "gpd", "exp", "gamma")
RULES = ("fixed", "variable")
HISTORICAL = ("spread", "random", "none")

SUMMARY_FIELDS = ("k", "kind", "y", "relbias", "relvar", "rrmse", "relbias_se", "coverage",
                  "mean_width", "pct_upper_low", "pct_lower_high", "n_fail", "n_rep")
RAW_FIELDS = ("k", "kind", "y", "rep", "estimate", "lo", "hi", "converged")


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo study: a true model, a stopping rule and a grid of return periods.

    ``params`` holds the family's true parameters by name: ``mu, sigma,
    xi`` (GEV), ``xi`` (GPD, matched to GEV(0, 1, xi) at rate
    ``exceed_rate``), ``beta`` (exponential) or ``alpha, beta`` (gamma).
    With ``historical="spread"`` the n0 historical values sit at evenly
    spaced true quantiles; ``"random"`` draws them afresh per replicate.
    """

    family: str = "gev"
    params: dict = field(default_factory=lambda: {"mu": 0.0, "sigma": 1.0, "xi": 0.2})
    rule: str = "fixed"
    k_grid: tuple = (20.0, 100.0, 500.0)
    kinds: tuple = ("std", "ex", "fc", "pc")
    y_values: tuple = (200.0,)
    reps: int = 1000
    coverage_reps: int = 0
    seed: int = 0
    n0: int = 10
    trim: float = 0.01
    historical: str = "spread"
    idealized: bool = False
    exceed_rate: float = 10.0
    counts: str = "poisson"
    confidence: float = 0.95
    max_n: int = S.DEFAULT_MAX_N_FIXED
    max_refits: int = S.DEFAULT_MAX_N_VARIABLE
    restarts: int = 5

    def __post_init__(self):
        object.__setattr__(self, "params", {k: float(v) for k, v in dict(self.params).items()})
        object.__setattr__(self, "k_grid", tuple(float(k) for k in self.k_grid))
        object.__setattr__(self, "y_values", tuple(float(y) for y in self.y_values))
        object.__setattr__(self, "kinds", tuple(LikelihoodKind.parse(k).value for k in self.kinds))
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.historical not in HISTORICAL:
            raise ValueError(f"historical must be one of {HISTORICAL}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0 <= self.coverage_reps <= self.reps:
            raise ValueError("coverage_reps must lie between 0 and reps")
        if not 0 <= self.trim < 0.25:
            raise ValueError("trim fraction must lie in [0, 0.25)")
        if not self.k_grid or any(not k > 1 for k in self.k_grid):
            raise ValueError("k-grid values must exceed 1")
        if not self.y_values or any(not y > 1 for y in self.y_values):
            raise ValueError("return periods must exceed 1")
        if self.historical != "none" and self.n0 < 1:
            raise ValueError("n0 must be at least 1 when historical data are used")
        if self.family == "gamma" and self.rule == "variable" and self.kinds != ("std",):
            raise ValueError("the gamma variable-rule study supports only the std kind")
        self.true_params()

    def true_params(self) -> D.Params:
        p = self.params
        if self.family == "gev":
            return D.GevParams(p.get("mu", 0.0), p.get("sigma", 1.0), p.get("xi", 0.2))
        if self.family == "gpd":
            return D.GpdParams.matching_gev(p.get("xi", 0.2), self.exceed_rate)
        if self.family == "exp":
            return D.ExpParams(p.get("beta", 1.0))
        return D.GammaParams(p.get("alpha", 1.0), p.get("beta", 1.0))

    def model(self) -> ModelSpec:
        tp = self.true_params()
        if self.family == "gev":
            if self.idealized:
                return ModelSpec("gev", {"mu": tp.mu, "sigma": tp.sigma})
            return ModelSpec.gev()
        if self.family == "gpd":
            return ModelSpec.gpd(tp.v)
        if self.family == "exp":
            return ModelSpec.exponential()
        return ModelSpec.gamma(tp.alpha)

    def truth(self, y: float) -> float:
        return float(D.return_level(self.true_params(), y))

    def threshold(self, k: float) -> float:
        """Fixed-rule threshold: the true level exceeded once every k periods on average."""
        return float(D.return_level(self.true_params(), k))


def stream(seed: int, k: float, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(round(k * 1e6)), int(rep)]))


@dataclass
class CellResult:
    """Raw per-replicate output of one k-cell.

    ``estimates[kind]`` has shape ``(reps, len(y_values))`` with NaN for
    failed fits; ``lo``/``hi`` likewise for the first ``coverage_reps``.
    """

    k: float
    estimates: dict
    lo: dict
    hi: dict
    converged: dict
    rep_ids: np.ndarray


def _historical(config: SimConfig, rng) -> Optional[S.HistoricalData]:
    if config.historical == "none":
        return None
    tp = config.true_params()
    if config.historical == "spread":
        return S.make_historical(tp, config.n0)
    return S.HistoricalData(np.sort(D.sample(rng, tp, config.n0)))


def _generate(config: SimConfig, k: float, rng):
    tp = config.true_params()
    if config.family == "gpd":
        if config.rule != "fixed":
            raise ValueError("the GPD study supports the fixed rule only")
        return S.run_gpd_fixed(rng, tp, config.threshold(k), config.exceed_rate, config.n0,
                               max_years=config.max_n, counts=config.counts)
    hist = _historical(config, rng)
    if config.rule == "fixed":
        return S.run_fixed(rng, tp, config.threshold(k), config.max_n, hist)
    if hist is None:
        raise ValueError("the variable rule needs historical data")
    cb = S.StdReturnLevel(config.model(), k, restarts=3)
    return S.run_variable(rng, tp, k, hist, config.max_refits, cb, min_n0=1)


def _replicate(config: SimConfig, k: float, rep: int):
    """Estimates (and intervals for coverage replicates) for every kind and y."""
    ny = len(config.y_values)
    out = {}
    with_ci = rep < config.coverage_reps
    try:
        sample = _generate(config, k, stream(config.seed, k, rep))
    except S.BudgetExceeded:
        sample = None
    model = config.model()
    for kname in config.kinds:
        est = np.full(ny, np.nan)
        lo = np.full(ny, np.nan)
        hi = np.full(ny, np.nan)
        ok = False
        if sample is not None:
            try:
                fit = mle(sample, model, kname, restarts=config.restarts)
                ok = fit.converged
                if ok:
                    est = np.asarray(return_level_estimate(fit, np.array(config.y_values)),
                                     dtype=float)
                    ok = bool(np.all(np.isfinite(est)))
                if ok and with_ci:
                    for j, y in enumerate(config.y_values):
                        ci = profile_ci_return_level(sample, model, kname, y,
                                                     config.confidence, fit=fit)
                        lo[j], hi[j] = ci.lower, ci.upper
            except (InfeasibleInitials, ValueError, FloatingPointError):
                ok = False
        if not ok:
            est[:] = np.nan
            lo[:] = np.nan
            hi[:] = np.nan
        out[kname] = (est, lo, hi, ok)
    return out


def _exp_fast_cell(config: SimConfig, k: float, reps: Sequence[int]):
    """Closed-form exponential estimators (no historical data, fixed rule)."""
    beta = config.true_params().beta
    c = config.threshold(k)
    n = np.empty(len(reps))
    total = np.empty(len(reps))
    last = np.empty(len(reps))
    for i, r in enumerate(reps):
        smp = S.run_fixed(stream(config.seed, k, r), config.true_params(), c, config.max_n)
        n[i] = smp.n
        total[i] = smp.obs.sum()
        last[i] = smp.obs[-1]
    inv = {
        "std": total / n,
        "ex": np.where(n > 1, (total - last) / np.maximum(n - 1, 1), np.nan),
        "pc": analytic.exp_pc_inverse_rate(n, total, c),
        "trunc": (total - last + c) / n,
    }
    if "fc" in config.kinds:
        inv["fc"] = 1.0 / analytic.exp_fc_rate(n, total, c)
    out = {}
    for kname in config.kinds:
        ratio = beta * inv[kname]
        est = np.outer(ratio, [config.truth(y) for y in config.y_values])
        out[kname] = est
    return out


def _gamma_variable_cell(config: SimConfig, k: float, reps: Sequence[int]):
    tp = config.true_params()
    g = S.gamma_multiplier(tp.alpha, k)
    means = np.empty(len(reps))
    for i, r in enumerate(reps):
        try:
            _, means[i] = S.run_gamma_variable(stream(config.seed, k, r), tp, g, config.n0,
                                               config.max_n)
        except S.BudgetExceeded:
            means[i] = np.nan
    # Std MLE of beta is alpha / mean, so each level scales with the mean
    ratio = means * tp.beta / tp.alpha
    return {"std": np.outer(ratio, [config.truth(y) for y in config.y_values])}


def _fast_path(config: SimConfig) -> Optional[str]:
    if config.family == "exp" and config.rule == "fixed" and config.historical == "none" \
            and config.coverage_reps == 0:
        return "exp"
    if config.family == "gamma" and config.rule == "variable":
        return "gamma"
    return None


def _run_reps(config: SimConfig, k: float, reps: Sequence[int]):
    """Work item: a contiguous block of replicates for one cell."""
    reps = list(reps)
    ny = len(config.y_values)
    fast = _fast_path(config)
    res = {kn: (np.full((len(reps), ny), np.nan), np.full((len(reps), ny), np.nan),
                np.full((len(reps), ny), np.nan), np.zeros(len(reps), dtype=bool))
           for kn in config.kinds}
    if fast is not None:
        est = _exp_fast_cell(config, k, reps) if fast == "exp" else _gamma_variable_cell(config, k, reps)
        for kn, e in est.items():
            res[kn][0][:] = e
            res[kn][3][:] = np.all(np.isfinite(e), axis=1)
        return k, reps, res
    for i, r in enumerate(reps):
        one = _replicate(config, k, r)
        for kn, (e, lo, hi, ok) in one.items():
            res[kn][0][i] = e
            res[kn][1][i] = lo
            res[kn][2][i] = hi
            res[kn][3][i] = ok
    return k, reps, res


def _blocks(n: int, size: int):
    return [range(a, min(a + size, n)) for a in range(0, n, size)]


def _collect(config: SimConfig, ks: Sequence[float], workers: int, block: Optional[int] = None):
    if block is None:
        block = config.reps if workers <= 1 else max(1, math.ceil(config.reps / (4 * workers)))
    items = [(k, b) for k in ks for b in _blocks(config.reps, block)]
    if workers <= 1:
        parts = [_run_reps(config, k, b) for k, b in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_reps, config, k, b) for k, b in items]
            parts = [f.result() for f in futs]
    cells = {}
    for k in ks:
        mine = sorted((p for p in parts if p[0] == k), key=lambda p: p[1][0])
        est, lo, hi, conv = {}, {}, {}, {}
        for kn in config.kinds:
            est[kn] = np.concatenate([p[2][kn][0] for p in mine])
            lo[kn] = np.concatenate([p[2][kn][1] for p in mine])
            hi[kn] = np.concatenate([p[2][kn][2] for p in mine])
            conv[kn] = np.concatenate([p[2][kn][3] for p in mine])
        rep_ids = np.concatenate([np.asarray(p[1]) for p in mine])
        cells[k] = CellResult(k, est, lo, hi, conv, rep_ids)
    return cells


def run_cell(config: SimConfig, k: float, kind=None, workers: int = 1) -> CellResult:
    """Raw estimates for one return period ``k`` (all kinds unless ``kind`` is given)."""
    if kind is not None:
        config = _replace(config, kinds=(LikelihoodKind.parse(kind).value,))
    return _collect(config, [float(k)], workers)[float(k)]


def _replace(config: SimConfig, **changes) -> SimConfig:
    d = {f.name: getattr(config, f.name) for f in fields(config)}
    d.update(changes)
    return SimConfig(**d)


# --- aggregation ------------------------------------------------------------------

def _trim_count(n: int, trim: float) -> int:
    return int(math.floor(trim * n + 1e-9))


def aggregate(estimates, truth: float, trim: float = 0.01) -> dict:
    """Trimmed relative bias, variance and RRMSE of estimates of ``truth``.

    NaN entries are failed fits: they are dropped and counted. Trimming
    removes ``floor(trim * n)`` values from each tail before the moments.
    """
    if not 0 <= trim < 0.5:
        raise ValueError("trim fraction must lie in [0, 0.5)")
    x = np.asarray(estimates, dtype=float).ravel()
    ok = np.isfinite(x)
    n_fail = int((~ok).sum())
    r = np.sort(x[ok] / truth)
    m = _trim_count(r.size, trim)
    kept = r[m: r.size - m] if m else r
    if kept.size == 0:
        nan = float("nan")
        return dict(relbias=nan, relvar=nan, rrmse=nan, relbias_se=nan, n_kept=0,
                    n_fail=n_fail, n_rep=int(x.size))
    relbias = float(kept.mean() - 1.0)
    relvar = float(kept.var())
    rrmse = float(math.sqrt(np.mean((kept - 1.0) ** 2)))
    return dict(relbias=relbias, relvar=relvar, rrmse=rrmse,
                relbias_se=float(math.sqrt(relvar / kept.size)), n_kept=int(kept.size),
                n_fail=n_fail, n_rep=int(x.size))


def coverage_stats(lo, hi, truth: float) -> dict:
    """Coverage and miss percentages over replicates with an interval; widths over finite ones."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    have = ~(np.isnan(lo) | np.isnan(hi))
    lo, hi = lo[have], hi[have]
    n = lo.size
    if n == 0:
        nan = float("nan")
        return dict(coverage=nan, mean_width=nan, pct_upper_low=nan, pct_lower_high=nan,
                    n_ci=0, n_width=0)
    cover = (lo <= truth) & (truth <= hi)
    width = hi - lo
    fin = np.isfinite(width)
    return dict(coverage=100.0 * cover.mean(),
                mean_width=float(width[fin].mean()) if fin.any() else float("nan"),
                pct_upper_low=100.0 * float((hi < truth).mean()),
                pct_lower_high=100.0 * float((lo > truth).mean()),
                n_ci=int(n), n_width=int(fin.sum()))


def coverage_cell(config: SimConfig, k: float, kind, y: float, workers: int = 1) -> dict:
    """Profile-interval coverage of the true y-year level over the coverage replicates."""
    if config.coverage_reps < 1:
        raise ValueError("coverage_reps must be positive")
    cfg = _replace(config, kinds=(LikelihoodKind.parse(kind).value,), y_values=(float(y),),
                   reps=config.coverage_reps)
    cell = _collect(cfg, [float(k)], workers)[float(k)]
    kn = cfg.kinds[0]
    return coverage_stats(cell.lo[kn][:, 0], cell.hi[kn][:, 0], cfg.truth(y))


@dataclass(frozen=True)
class SummaryRow:
    k: float
    kind: str
    y: float
    relbias: float
    relvar: float
    rrmse: float
    relbias_se: float
    coverage: float
    mean_width: float
    pct_upper_low: float
    pct_lower_high: float
    n_fail: int
    n_rep: int


@dataclass
class SimSummary:
    rows: list
    notes: list = field(default_factory=list)

    def row(self, k: float, kind: str, y: float) -> SummaryRow:
        kind = LikelihoodKind.parse(kind).value
        for r in self.rows:
            if r.k == float(k) and r.kind == kind and r.y == float(y):
                return r
        raise KeyError((k, kind, y))

    def to_csv(self) -> str:
        return rows_to_csv(SUMMARY_FIELDS, [asdict(r) for r in self.rows])


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def summarize(config: SimConfig, cells: dict) -> SimSummary:
    rows, notes = [], []
    for k in sorted(cells):
        cell = cells[k]
        for kn in config.kinds:
            for j, y in enumerate(config.y_values):
                truth = config.truth(y)
                agg = aggregate(cell.estimates[kn][:, j], truth, config.trim)
                if config.coverage_reps:
                    cov = coverage_stats(cell.lo[kn][: config.coverage_reps, j],
                                         cell.hi[kn][: config.coverage_reps, j], truth)
                else:
                    cov = coverage_stats([], [], truth)
                rows.append(SummaryRow(k, kn, y, agg["relbias"], agg["relvar"], agg["rrmse"],
                                       agg["relbias_se"], cov["coverage"], cov["mean_width"],
                                       cov["pct_upper_low"], cov["pct_lower_high"],
                                       agg["n_fail"], agg["n_rep"]))
                lhs = agg["rrmse"] ** 2
                rhs = agg["relvar"] + agg["relbias"] ** 2
                if np.isfinite(lhs) and lhs > 0 and abs(lhs - rhs) > 0.1 * lhs:
                    notes.append(f"k={k!r} kind={kn} y={y!r}: rrmse^2 and relvar+relbias^2 differ by over 10%")
    return SimSummary(rows, notes)


def raw_rows(config: SimConfig, cells: dict) -> list:
    """One row per (k, kind, y, replicate), sorted in that order."""
    out = []
    for k in sorted(cells):
        cell = cells[k]
        for kn in config.kinds:
            for j, y in enumerate(config.y_values):
                for i, r in enumerate(cell.rep_ids):
                    out.append(dict(k=k, kind=kn, y=y, rep=int(r),
                                    estimate=float(cell.estimates[kn][i, j]),
                                    lo=float(cell.lo[kn][i, j]), hi=float(cell.hi[kn][i, j]),
                                    converged=bool(cell.converged[kn][i])))
    return out


def run_study(config: SimConfig, workers: int = 1):
    """Run every k-cell; returns ``(SimSummary, raw rows)``.

    Output is identical for any ``workers`` since replicate streams are
    fixed and results are re-sorted by (k, replicate) before aggregation.
    """
    cells = _collect(config, list(config.k_grid), workers)
    return summarize(config, cells), raw_rows(config, cells)
