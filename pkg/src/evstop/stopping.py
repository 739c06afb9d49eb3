"""Stopped-sample generation under fixed- and variable-threshold rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from evstop import distributions as D

DEFAULT_MAX_N_FIXED = 10**6
DEFAULT_MAX_N_VARIABLE = 10**4
_FIRST_BLOCK = 64
_MAX_BLOCK = 1 << 20


class BudgetExceeded(RuntimeError):
    """Raised when a stopping rule has not triggered within the draw budget.

    ``partial`` holds whatever was generated before giving up.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class StoppingRule:
    variant: str
    level: float

    def __post_init__(self):
        if self.variant not in ("fixed", "variable"):
            raise ValueError(f"unknown stopping rule {self.variant!r}")
        if not np.isfinite(self.level):
            raise ValueError("stopping level must be finite")
        if self.variant == "variable" and not self.level > 1:
            raise ValueError("variable rule needs a return period k > 1")

    @classmethod
    def fixed(cls, c: float) -> "StoppingRule":
        return cls("fixed", float(c))

    @classmethod
    def variable(cls, k: float) -> "StoppingRule":
        return cls("variable", float(k))

    @property
    def is_fixed(self) -> bool:
        return self.variant == "fixed"


@dataclass(frozen=True)
class HistoricalData:
    values: np.ndarray
    t: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.t is not None:
            object.__setattr__(self, "t", np.asarray(self.t, dtype=float))

    @property
    def n0(self) -> int:
        return int(self.values.size)

    @classmethod
    def empty(cls) -> "HistoricalData":
        return cls(np.empty(0))


@dataclass(frozen=True)
class StoppedSample:
    """Observations ``x_1..x_N`` with per-index stopping thresholds.

    ``exempt`` holds 0-based observation indices (before the last) that
    are allowed to exceed their threshold; their full-conditioning term is
    dropped. ``t_obs`` is an optional covariate (e.g. year) per observation.
    """

    historical: HistoricalData
    obs: np.ndarray
    thresholds: np.ndarray
    rule: StoppingRule
    exempt: frozenset = frozenset()
    t_obs: Optional[np.ndarray] = None
    fit_failures: tuple = ()
    warnings: tuple = ()

    def __post_init__(self):
        obs = np.asarray(self.obs, dtype=float)
        thr = np.asarray(self.thresholds, dtype=float)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "exempt", frozenset(int(i) for i in self.exempt))
        if self.t_obs is not None:
            object.__setattr__(self, "t_obs", np.asarray(self.t_obs, dtype=float))
        if obs.ndim != 1 or obs.size < 1:
            raise ValueError("a stopped sample needs at least one observation")
        if thr.shape != obs.shape:
            raise ValueError("observations and thresholds must have equal length")
        n = obs.size
        if not obs[-1] > thr[-1]:
            raise ValueError(f"final observation {obs[-1]} does not exceed its threshold {thr[-1]}")
        over = np.flatnonzero(obs[:-1] > thr[:-1])
        bad = [int(i) for i in over if int(i) not in self.exempt]
        if bad:
            raise ValueError(f"observation {bad[0]} exceeds its threshold but is not exempt")
        if any(i < 0 or i >= n - 1 for i in self.exempt):
            raise ValueError("exempt indices must refer to observations before the last")
        if self.rule.is_fixed and not np.all(thr == self.rule.level):
            raise ValueError("fixed rule thresholds must all equal c")

    @property
    def n(self) -> int:
        return int(self.obs.size)


@dataclass(frozen=True)
class GpdStoppedSample:
    """Threshold exceedances grouped by year, stopped after the year in which ``c`` is first exceeded.

    ``values`` are levels above ``v`` in time order and ``year`` gives the
    0-based year of each. The first ``n0`` exceedances are historical and
    never trigger the rule; ``trigger`` is the flat index of the stopping
    exceedance. Exceedances after the trigger in the final year are
    retained unconditioned.
    """

    values: np.ndarray
    year: np.ndarray
    n0: int
    n_years: int
    v: float
    c: float
    trigger: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        yr = np.asarray(self.year, dtype=np.int64)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "year", yr)
        if not self.c > self.v:
            raise ValueError("stopping threshold c must exceed the modelling threshold v")
        if np.any(vals <= self.v):
            raise ValueError("all values must exceed v")
        if np.any(np.diff(yr) < 0):
            raise ValueError("years must be non-decreasing")
        t = self.trigger
        if not (self.n0 <= t < vals.size) or not vals[t] > self.c:
            raise ValueError("trigger must be a non-historical exceedance of c")
        if np.any(vals[self.n0:t] > self.c):
            raise ValueError("an earlier non-historical exceedance of c would have stopped sampling")
        if yr[t] != self.n_years - 1 or (yr.size and yr[-1] != self.n_years - 1):
            raise ValueError("the trigger must lie in the final year")

    @property
    def n_v(self) -> int:
        return int(self.values.size)

    @property
    def n_y(self) -> int:
        return int(self.n_years)

    @property
    def final_year_mask(self) -> np.ndarray:
        return self.year == self.n_years - 1

    def by_year(self) -> list:
        return [self.values[self.year == j] for j in range(self.n_years)]

    def tau_hat(self, drop_final_year: bool = False) -> float:
        if drop_final_year:
            if self.n_years < 2:
                return float("nan")
            return float((~self.final_year_mask).sum()) / (self.n_years - 1)
        return self.n_v / self.n_y


def make_historical(params: D.Params, n0: int) -> HistoricalData:
    """Evenly spread historical values at the ``j/(n0+1)`` quantiles."""
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    probs = np.arange(1, n0 + 1) / (n0 + 1.0)
    return HistoricalData(np.asarray(D.quantile(params, probs), dtype=float))


def run_fixed(rng: np.random.Generator, params: D.Params, c: float,
              max_n: int = DEFAULT_MAX_N_FIXED,
              historical: Optional[HistoricalData] = None) -> StoppedSample:
    """Sample until the first observation above ``c``."""
    historical = historical if historical is not None else HistoricalData.empty()
    notes = []
    if historical.n0 and c <= historical.values.max():
        notes.append("threshold c is not above the largest historical value")
    chunks = []
    drawn = 0
    block = _FIRST_BLOCK
    while drawn < max_n:
        size = min(block, max_n - drawn)
        x = D.sample(rng, params, size)
        hit = np.flatnonzero(x > c)
        if hit.size:
            chunks.append(x[: hit[0] + 1])
            obs = np.concatenate(chunks)
            return StoppedSample(historical, obs, np.full(obs.size, float(c)),
                                 StoppingRule.fixed(c), warnings=tuple(notes))
        chunks.append(x)
        drawn += size
        block = min(block * 2, _MAX_BLOCK)
    raise BudgetExceeded(f"no exceedance of c={c} in {max_n} draws",
                         partial=np.concatenate(chunks) if chunks else np.empty(0))


class StdReturnLevel:
    """Default variable-rule threshold: standard-likelihood MLE of the k-year level.

    Warm-starts each fit from the previous one, so replaying the same
    sequence of prefixes reproduces the thresholds exactly.
    """

    def __init__(self, model, k: float, restarts: int = 3):
        self.model = model
        self.k = k
        self.restarts = restarts
        self._last = None

    def __call__(self, values: np.ndarray) -> Optional[float]:
        from evstop.inference import mle, return_level_estimate
        from evstop.likelihoods import LikelihoodKind

        fit = mle(values, self.model, LikelihoodKind.STD, init=self._last,
                  restarts=self.restarts)
        if not fit.converged:
            return None
        self._last = fit.theta_hat
        level = float(return_level_estimate(fit, self.k))
        return level if np.isfinite(level) else None


def default_model_for(params: D.Params):
    from evstop.likelihoods import ModelSpec

    if isinstance(params, D.GevParams):
        return ModelSpec.gev()
    if isinstance(params, D.GpdParams):
        return ModelSpec.gpd(params.v)
    if isinstance(params, D.ExpParams):
        return ModelSpec.exponential()
    return ModelSpec.gamma(params.alpha)


def run_variable(rng: np.random.Generator, params: D.Params, k: float,
                 historical: HistoricalData, max_n: int = DEFAULT_MAX_N_VARIABLE,
                 fit_callback: Optional[Callable[[np.ndarray], Optional[float]]] = None,
                 min_n0: int = 10) -> StoppedSample:
    """Sample until ``x_i`` exceeds the k-year level fitted to everything before it.

    ``fit_callback(values)`` returns the threshold for the next draw given
    historical plus earlier observations, or ``None`` on failure, in which
    case the previous threshold is reused and the index is recorded.
    """
    if historical.n0 < min_n0:
        raise ValueError(f"variable rule needs at least {min_n0} historical values")
    if fit_callback is None:
        fit_callback = StdReturnLevel(default_model_for(params), k)
    values = list(historical.values)
    obs, thr, failures = [], [], []
    s_prev = None
    for i in range(max_n):
        s = fit_callback(np.asarray(values))
        if s is None:
            if s_prev is None:
                raise RuntimeError("threshold fit failed on the historical data alone")
            s = s_prev
            failures.append(i)
        x = float(D.sample(rng, params, 1)[0])
        obs.append(x)
        thr.append(s)
        values.append(x)
        s_prev = s
        if x > s:
            return StoppedSample(historical, np.asarray(obs), np.asarray(thr),
                                 StoppingRule.variable(k), fit_failures=tuple(failures))
    raise BudgetExceeded(f"variable rule did not stop within {max_n} refits",
                         partial=(np.asarray(obs), np.asarray(thr)))


def variable_thresholds(sample: StoppedSample, model, k: float,
                        fit_callback: Optional[Callable] = None) -> np.ndarray:
    """Recompute ``s_{k,1..N}`` from a stored sample."""
    if fit_callback is None:
        fit_callback = StdReturnLevel(model, k)
    values = list(sample.historical.values)
    out = []
    s_prev = None
    for x in sample.obs:
        s = fit_callback(np.asarray(values))
        s = s_prev if s is None else s
        out.append(s)
        values.append(x)
        s_prev = s
    return np.asarray(out, dtype=float)


def gamma_multiplier(alpha: float, k: float) -> float:
    """Ratio ``gamma`` with ``x_hat_k = gamma * xbar`` for known-shape gamma data."""
    from scipy import special

    return float(special.gammaincinv(alpha, 1.0 - 1.0 / k) / alpha)


def run_gamma_variable(rng: np.random.Generator, p: D.GammaParams, gamma_mult: float,
                       n0: int, max_n: int = DEFAULT_MAX_N_FIXED):
    """Stop at the first ``X_n > gamma_mult * Xbar_{n-1}``; return ``(N, Xbar_N)``.

    The historical mean is random, ``Xbar_0 ~ Gamma(n0 * alpha, n0 * beta)``,
    and enters every running mean.
    """
    if not gamma_mult > 0:
        raise ValueError("gamma multiplier must be positive")
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    total = rng.gamma(n0 * p.alpha, 1.0 / p.beta)
    count = n0
    drawn = 0
    block = _FIRST_BLOCK
    while drawn < max_n:
        size = min(block, max_n - drawn)
        x = rng.gamma(p.alpha, 1.0 / p.beta, size=size)
        before = total + np.concatenate(([0.0], np.cumsum(x[:-1])))
        means = before / (count + np.arange(size))
        hit = np.flatnonzero(x > gamma_mult * means)
        if hit.size:
            j = hit[0]
            n = drawn + j + 1
            return n, float((before[j] + x[j]) / (count + j + 1))
        total = before[-1] + x[-1]
        count += size
        drawn += size
        block = min(block * 2, _MAX_BLOCK)
    raise BudgetExceeded(f"gamma variable rule did not stop within {max_n} draws")


def run_gpd_fixed(rng: np.random.Generator, p: D.GpdParams, c: float,
                  exceed_rate: float = 10.0, n0_exceedances: int = 10,
                  max_years: int = DEFAULT_MAX_N_FIXED,
                  counts: str = "poisson") -> GpdStoppedSample:
    """Simulate yearly exceedances of ``v``; stop at the end of the year in which ``c`` is first exceeded.

    ``counts`` is ``"poisson"`` (Poisson(exceed_rate) per year) or
    ``"fixed"`` (exactly ``round(exceed_rate)`` per year).
    """
    if not c > p.v:
        raise ValueError("c must exceed v")
    if counts not in ("poisson", "fixed"):
        raise ValueError(f"unknown count law {counts!r}")
    vals_chunks, year_chunks = [], []
    years_done = 0
    seen = 0
    block = _FIRST_BLOCK
    while years_done < max_years:
        ny = min(block, max_years - years_done)
        if counts == "poisson":
            per_year = rng.poisson(exceed_rate, size=ny)
        else:
            per_year = np.full(ny, int(round(exceed_rate)))
        m = int(per_year.sum())
        vals = p.v + D.gpd_quantile(rng.random(m), p)
        yrs = np.repeat(np.arange(years_done, years_done + ny), per_year)
        idx = np.arange(seen, seen + m)
        hit = np.flatnonzero((vals > c) & (idx >= n0_exceedances))
        if hit.size:
            last_year = yrs[hit[0]]
            keep = yrs <= last_year
            vals_chunks.append(vals[keep])
            year_chunks.append(yrs[keep])
            return GpdStoppedSample(np.concatenate(vals_chunks), np.concatenate(year_chunks),
                                    n0=n0_exceedances, n_years=int(last_year) + 1,
                                    v=p.v, c=float(c), trigger=int(seen + hit[0]))
        vals_chunks.append(vals)
        year_chunks.append(yrs)
        seen += m
        years_done += ny
        block = min(block * 2, _MAX_BLOCK)
    raise BudgetExceeded(f"no exceedance of c={c} within {max_years} years")
