"""Maximum-likelihood fits, return levels, profile-likelihood intervals and the trend model.

Fits run on standardised data (location ``m`` and scale ``s`` taken from
the sample) and are mapped back, which keeps optimiser tolerances
meaningful whatever the data units are.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy import optimize, special, stats

from evstop import _core
from evstop import distributions as D
from evstop.likelihoods import (LikData, LikelihoodKind, ModelSpec, SampleLike, lik_data,
                                pack)

EULER_GAMMA = 0.5772156649015329
CHI2_CUTOFFS = {0.90: 2.705543, 0.95: 3.841459, 0.99: 6.634897}
WALD_Z95 = 1.959964

XATOL = 1e-8
FATOL = 1e-10
MAXFEV = 2000
AGREE_TOL = 1e-6
JITTER = 0.2


class InfeasibleInitials(ValueError):
    """No starting point gave a finite likelihood."""


def chi2_cutoff(confidence: float) -> float:
    for level, cut in CHI2_CUTOFFS.items():
        if abs(confidence - level) < 1e-12:
            return cut
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    return float(stats.chi2.ppf(confidence, 1))


@dataclass(frozen=True)
class FitResult:
    theta_hat: np.ndarray
    max_loglik: float
    converged: bool
    n_evals: int
    kind: LikelihoodKind
    restarts_used: int
    model: ModelSpec
    tau_hat: float = float("nan")

    @property
    def params(self) -> D.Params:
        return params_from_theta(self.model, self.theta_hat, self.tau_hat)


@dataclass(frozen=True)
class ProfileInterval:
    lower: float
    upper: float
    confidence: float
    cutoff: float
    estimate: float
    skipped: tuple = ()
    flags: tuple = ()

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class TrendFit:
    alpha0: float
    beta_trend: float
    sigma: float
    xi: float
    beta_ci: Optional[tuple]
    beta_se: float
    t0: float
    max_loglik: float
    converged: bool
    hessian_ok: bool
    n_obs: int

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.alpha0, self.beta_trend, self.sigma, self.xi])

    def location(self, year: float) -> float:
        return self.alpha0 + self.beta_trend * (year - self.t0)


def params_from_theta(model: ModelSpec, theta, tau: float = float("nan")) -> D.Params:
    th = np.asarray(theta, dtype=float)
    if model.family == "gev":
        return D.GevParams(*th)
    if model.family == "gpd":
        return D.GpdParams(model.v, th[0], th[1], tau if np.isfinite(tau) else 1.0)
    if model.family == "exp":
        return D.ExpParams(th[0])
    if model.family == "gamma":
        return D.GammaParams(model.alpha, th[0])
    raise ValueError("trend fits have no single distribution; use TrendFit.location")


# --- standardisation ---------------------------------------------------------

@dataclass(frozen=True)
class _Scaled:
    """A sample and model expressed in standardised units ``(x - m) / s``."""

    model: ModelSpec
    data: LikData
    m: float
    s: float
    orig_model: ModelSpec
    orig_data: LikData

    def to_internal(self, theta) -> np.ndarray:
        th = np.array(theta, dtype=float)
        fam = self.orig_model.family
        if fam == "gev":
            th[0] = (th[0] - self.m) / self.s
            th[1] /= self.s
        elif fam == "gev_trend":
            th[0] = (th[0] - self.m) / self.s
            th[1] /= self.s
            th[2] /= self.s
        elif fam == "gpd":
            th[0] /= self.s
        else:
            th[0] *= self.s
        return th

    def to_external(self, theta) -> np.ndarray:
        th = np.array(theta, dtype=float)
        fam = self.orig_model.family
        if fam == "gev":
            th[0] = self.m + self.s * th[0]
            th[1] *= self.s
        elif fam == "gev_trend":
            th[0] = self.m + self.s * th[0]
            th[1] *= self.s
            th[2] *= self.s
        elif fam == "gpd":
            th[0] *= self.s
        else:
            th[0] /= self.s
        return th

    def level_in(self, x):
        return (np.asarray(x, dtype=float) - self.m) / self.s

    def level_out(self, x):
        return self.m + self.s * np.asarray(x, dtype=float)


def _kept_values(data: LikData, kind: LikelihoodKind) -> np.ndarray:
    obs = data.obs
    if kind is LikelihoodKind.EX:
        obs = obs[~data.drop_ex]
    elif kind is LikelihoodKind.TRUNC:
        obs = np.where(data.role == 2, data.thr, obs)
    return np.concatenate([data.hist, obs])


def _scale(model: ModelSpec, data: LikData, kind: LikelihoodKind) -> _Scaled:
    vals = _kept_values(data, kind)
    if vals.size == 0:
        raise ValueError("no observations remain to fit")
    fam = model.family
    if fam in ("gev", "gev_trend"):
        m = float(vals.mean())
        s = float(vals.std())
        if not s > 0:
            s = max(abs(m), 1.0)
    elif fam == "gpd":
        m = model.v
        s = float(np.mean(vals - model.v))
        if not s > 0:
            s = 1.0
    else:
        m = 0.0
        s = float(vals.mean())
        if not s > 0:
            s = 1.0

    def tr(x):
        return np.ascontiguousarray((x - m) / s, dtype=float)

    fixed = dict(model.fixed)
    probe = _Scaled(model, data, m, s, model, data)
    if fixed:
        full = np.zeros(model.n_params)
        for i, name in enumerate(model.param_names):
            full[i] = fixed.get(name, 0.0)
        full = probe.to_internal(full)
        fixed = {name: float(full[i]) for i, name in enumerate(model.param_names)
                 if name in fixed}
    smodel = replace(model, fixed=fixed, v=0.0 if fam == "gpd" else model.v)
    sdata = replace(data, hist=tr(data.hist), obs=tr(data.obs), thr=tr(data.thr))
    return _Scaled(smodel, sdata, m, s, model, data)


# --- initial values ------------------------------------------------------------

def _moment_init(sc: _Scaled, kind: LikelihoodKind):
    """Base start and per-parameter scale (for steps and jitter), in standardised units."""
    model = sc.model
    data = sc.data
    vals = _kept_values(data, kind)
    fam = model.family
    if fam == "gev":
        sd = vals.std() if vals.size > 1 else 1.0
        sig = max(math.sqrt(6.0) * sd / math.pi, 1e-3)
        base = np.array([vals.mean() - EULER_GAMMA * sig, sig, 0.1])
        scale = np.array([sig, sig, 0.5])
    elif fam == "gev_trend":
        t = np.concatenate([data.t_hist, data.t_obs if kind is not LikelihoodKind.EX
                            else data.t_obs[~data.drop_ex]])
        if t.size > 1 and np.ptp(t) > 0:
            slope, icpt = np.polyfit(t, vals, 1)
        else:
            slope, icpt = 0.0, vals.mean()
        resid = vals - (icpt + slope * t)
        sig = max(math.sqrt(6.0) * resid.std() / math.pi, 1e-3)
        base = np.array([icpt - EULER_GAMMA * sig, slope, sig, 0.1])
        span = max(np.ptp(t), 1.0) if t.size else 1.0
        scale = np.array([sig, sig / span, sig, 0.5])
    elif fam == "gpd":
        mean = vals.mean()
        var = vals.var() if vals.size > 1 else mean**2
        xi0 = 0.5 * (1.0 - mean**2 / var) if var > 0 else 0.0
        xi0 = min(max(xi0, -0.4), 0.4)
        sig = max(mean * (1.0 - xi0), 1e-3)
        base = np.array([sig, xi0])
        scale = np.array([sig, 0.5])
    elif fam == "exp":
        base = np.array([1.0 / max(vals.mean(), 1e-12)])
        scale = base.copy()
    else:
        base = np.array([model.alpha / max(vals.mean(), 1e-12)])
        scale = base.copy()
    return model.template(base), scale


def _start_rows(base_free: np.ndarray, scale_free: np.ndarray, restarts: int) -> np.ndarray:
    rows = [base_free]
    for r in range(1, restarts):
        u = np.random.default_rng([r, 7919]).uniform(-1.0, 1.0, size=base_free.size)
        rows.append(base_free + JITTER * u * np.maximum(np.abs(base_free), scale_free))
    return np.ascontiguousarray(rows, dtype=float)


def _run_fit(args, inits, step, early_stop=True, polish=True):
    return _core.fit(inits, step, args, XATOL, FATOL, MAXFEV, AGREE_TOL, early_stop, polish)


def _tau_for(data: LikData, kind: LikelihoodKind) -> float:
    return data.tau_ex if kind is LikelihoodKind.EX else data.tau


def _fit_scaled(sc: _Scaled, kind: LikelihoodKind, init, restarts: int):
    model = sc.model
    base, scale = _moment_init(sc, kind)
    free = model.free_idx
    args = pack(model, kind, sc.data)
    rows = []
    if init is not None:
        rows.append(sc.to_internal(sc.orig_model.template(init))[free])
    rows.extend(_start_rows(base[free], scale[free], restarts))
    if model.family in ("gev", "gev_trend", "gpd"):
        # a zero-shape start stays feasible when the moment start is not
        alt = base.copy()
        alt[-1] = 0.0
        rows.append(alt[free])
    inits = np.ascontiguousarray(rows, dtype=float)
    n_main = len(rows) - (1 if model.family in ("gev", "gev_trend", "gpd") else 0)
    f0 = _core.negloglik_many(inits, args)
    if not np.isfinite(f0[:n_main]).any():
        if not np.isfinite(f0).any():
            raise InfeasibleInitials("every starting point has zero likelihood")
        inits = inits[np.isfinite(f0)]
    else:
        inits = inits[:n_main][: max(restarts, 1) + (init is not None)]
    step = 0.1 * scale[free]
    x, fx, nfev, used, conv, _ = _run_fit(args, inits, step)
    theta = model.template()
    theta[free] = x
    return theta, fx, nfev, used, conv


def mle(sample: SampleLike, model: ModelSpec, kind: Union[LikelihoodKind, str] = LikelihoodKind.STD,
        init=None, restarts: int = 5) -> FitResult:
    """Maximise the ``kind`` log-likelihood by multi-start Nelder-Mead.

    ``init`` is an optional full parameter vector tried before the
    moment-based starts. ``converged`` is set when the best two starts
    agree within 1e-6 in log-likelihood.
    """
    kind = LikelihoodKind.parse(kind)
    data = sample if isinstance(sample, LikData) else lik_data(sample, model.t0)
    sc = _scale(model, data, kind)
    theta_i, fx, nfev, used, conv = _fit_scaled(sc, kind, init, restarts)
    theta = model.template(sc.to_external(theta_i))
    ll = -float(_core.negloglik(theta, pack(model, kind, data, template=theta,
                                            free_idx=np.arange(model.n_params))))
    return FitResult(theta, ll, bool(conv and np.isfinite(ll)), int(nfev), kind, int(used),
                     model, _tau_for(data, kind))


def return_level_estimate(fit: FitResult, y) -> np.ndarray:
    """Fitted y-year level (GPD fits use the estimated exceedance rate)."""
    return D.return_level(fit.params, y)


def implied_k(c: float, fit: FitResult) -> float:
    """Return period whose fitted level equals ``c``; ``inf`` above a finite upper endpoint."""
    p = fit.params
    if isinstance(p, D.GpdParams):
        tail = float(D.gpd_sf(c - p.v, p)) * p.tau_v
    elif isinstance(p, D.GammaParams):
        tail = float(special.gammaincc(p.alpha, p.beta * c)) if c > 0 else 1.0
    elif isinstance(p, D.ExpParams):
        tail = math.exp(-p.beta * c) if c > 0 else 1.0
    else:
        tail = float(D.gev_sf(c, p))
    if tail <= 0.0:
        return math.inf
    if tail >= 1.0:
        raise ValueError("c lies at or below the fitted one-year level")
    return 1.0 / tail


# --- profile likelihood ---------------------------------------------------------

class ProfileLikelihood:
    """Profile log-likelihood of the y-year return level for one sample and kind."""

    def __init__(self, sample: SampleLike, model: ModelSpec, kind, y: float,
                 fit: Optional[FitResult] = None, t_eval: float = 0.0):
        self.kind = LikelihoodKind.parse(kind)
        self.model = model
        self.y = float(y)
        data = sample if isinstance(sample, LikData) else lik_data(sample, model.t0)
        self.sc = _scale(model, data, self.kind)
        if fit is None:
            fit = mle(data, model, self.kind)
        self.fit = fit
        self.theta_i = self.sc.to_internal(fit.theta_hat)
        self.ll_hat = fit.max_loglik
        self.t_eval = t_eval - model.t0
        smodel = self.sc.model
        self.anchor_free = 0 in set(smodel.free_idx.tolist())
        fam = model.family
        if fam == "gpd":
            aux = _tau_for(data, self.kind)
        elif fam == "gamma":
            aux = float(special.gammaincinv(model.alpha, 1.0 - 1.0 / self.y))
        else:
            aux = 0.0
        self.aux = aux
        self.estimate = float(self._level_of(fit.theta_hat))
        self.skipped = []
        self._warm = self.theta_i.copy()
        # nuisance solutions by (standardised) level, for nearest-neighbour warm starts
        self._sols = [(float(self.sc.level_in(self.estimate)), self.theta_i.copy())]
        self._scale = _moment_init(self.sc, self.kind)[1]
        # log-likelihood offset between standardised and original units
        ll_int = -float(_core.negloglik(self.theta_i, pack(smodel, self.kind, self.sc.data,
                                                                 template=self.theta_i,
                                                                 free_idx=np.arange(smodel.n_params))))
        self.offset = self.ll_hat - ll_int
        if self.anchor_free:
            self.nuis = np.array([i for i in smodel.free_idx if i != 0], dtype=np.int64)
        else:
            if smodel.n_free != 1:
                raise NotImplementedError("profiling with a fixed location needs exactly one free parameter")
            self.nuis = smodel.free_idx.copy()

    def _level_of(self, theta) -> float:
        if self.model.family == "gev_trend":
            mu = theta[0] + theta[1] * self.t_eval
            return float(D.gev_return_level(self.y, D.GevParams(mu, theta[2], theta[3])))
        return float(return_level_estimate(replace(self.fit, theta_hat=np.asarray(theta)), self.y))

    def loglik_at(self, xy: float) -> float:
        """Profile log-likelihood with the return level held at ``xy`` (data units)."""
        smodel = self.sc.model
        if not self.anchor_free:
            raise RuntimeError("use loglik_param for fixed-location models")
        prof = np.array([1.0, float(self.sc.level_in(xy)), self.y, self.aux, self.t_eval])
        if self.nuis.size == 0:
            th = self.theta_i.copy()
            args = pack(smodel, self.kind, self.sc.data, template=th,
                        free_idx=np.empty(0, dtype=np.int64), prof=prof)
            f = float(_core.negloglik(np.empty(0), args))
            return -f + self.offset
        lvl = prof[1]
        self._warm = min(self._sols, key=lambda p: abs(p[0] - lvl))[1]
        args = pack(smodel, self.kind, self.sc.data, template=self._warm, free_idx=self.nuis,
                    prof=prof)
        inits = self._nuisance_starts(args)
        if inits is None:
            self.skipped.append(float(xy))
            return -math.inf
        x, fx, _, _, _, _ = _run_fit(args, inits, 0.1 * self._scale[self.nuis], early_stop=True)
        if not np.isfinite(fx):
            self.skipped.append(float(xy))
            return -math.inf
        self._warm = self._warm.copy()
        self._warm[self.nuis] = x
        self._sols.append((lvl, self._warm))
        return -float(fx) + self.offset

    def _nuisance_starts(self, args):
        """Warm start if feasible, else the best two of the MLE start and a small grid."""
        rows = [self._warm[self.nuis]]
        if np.isfinite(_core.negloglik(rows[0], args)):
            return np.ascontiguousarray(rows)
        rows.append(self.theta_i[self.nuis])
        f = _core.negloglik_many(np.ascontiguousarray(rows), args)
        if np.isfinite(f).sum() < 2 and self.model.family in ("gev", "gev_trend", "gpd"):
            shape_pos = self.sc.model.n_params - 1
            scale_pos = shape_pos - 1
            for mult in (1.0, 3.0, 10.0):
                for xi in (0.0, -0.3, 0.3, 0.6, 1.0):
                    th = self.theta_i.copy()
                    th[shape_pos] = xi
                    th[scale_pos] = self.theta_i[scale_pos] * mult
                    rows.append(th[self.nuis])
            f = _core.negloglik_many(np.ascontiguousarray(rows), args)
        ok = np.flatnonzero(np.isfinite(f))
        if ok.size == 0:
            return None
        order = ok[np.argsort(f[ok], kind="stable")][:2]
        return np.ascontiguousarray([rows[i] for i in sorted(order)])

    def loglik_param(self, value: float) -> float:
        """Log-likelihood with the single free parameter set to ``value``."""
        smodel = self.sc.model
        th = self.theta_i.copy()
        th[self.nuis[0]] = value
        args = pack(smodel, self.kind, self.sc.data, template=th,
                    free_idx=np.empty(0, dtype=np.int64))
        return -float(_core.negloglik(np.empty(0), args)) + self.offset

    def deviance(self, xy: float) -> float:
        return 2.0 * (self.ll_hat - self.loglik_at(xy))


def _side_bound(f, x0, se, direction, cutoff, lo_limit=-math.inf):
    """March from ``x0`` until deviance ``f`` reaches ``cutoff``; return the crossing or inf."""
    prev = x0
    prev_val = 0.0
    flags = []
    for seg, rng_se in enumerate((8.0, 16.0, 32.0, 64.0)):
        start = 0.0 if seg == 0 else rng_se / 2.0
        step = rng_se / 16.0
        for j in range(1, 17 if seg == 0 else 9):
            x = x0 + direction * (start + j * step) * se
            val = f(x)
            if val >= cutoff:
                if np.isfinite(val):
                    root = optimize.brentq(lambda z: f(z) - cutoff, min(prev, x), max(prev, x),
                                           xtol=1e-10, rtol=1e-12)
                    return root, flags
                a, b = prev, x
                for _ in range(80):
                    mid = 0.5 * (a + b)
                    vm = f(mid)
                    if not np.isfinite(vm):
                        b = mid
                    elif vm >= cutoff:
                        root = optimize.brentq(lambda z: f(z) - cutoff, min(a, mid), max(a, mid),
                                               xtol=1e-10, rtol=1e-12)
                        return root, flags
                    else:
                        a = mid
                flags.append("support_edge")
                return a, flags
            prev, prev_val = x, val
    flags.append("no_crossing")
    return direction * math.inf, flags


def _side_se(f, x0, h):
    d = f(x0 + h)
    if np.isfinite(d) and d > 1e-8:
        return abs(h) / math.sqrt(d)
    return abs(h) * 4.0


def profile_ci_return_level(sample: SampleLike, model: ModelSpec, kind, y: float,
                            confidence: float = 0.95, fit: Optional[FitResult] = None,
                            t_eval: float = 0.0) -> ProfileInterval:
    """Profile-likelihood interval for the y-year return level.

    Models with the location fixed and a single free parameter use the
    likelihood-ratio interval for that parameter mapped through the
    (monotone) return-level function.
    """
    cutoff = chi2_cutoff(confidence)
    pl = ProfileLikelihood(sample, model, kind, y, fit=fit, t_eval=t_eval)
    flags = [] if pl.fit.converged else ["fit_not_converged"]

    if pl.anchor_free:
        x0 = pl.estimate
        cache = {}

        def ll(x):
            if x not in cache:
                cache[x] = pl.loglik_at(x)
            return cache[x]

        def scan(ll_hat):
            def dev(x):
                v = ll(x)
                return max(2.0 * (ll_hat - v), 0.0) if np.isfinite(v) else math.inf
            h = 0.05 * pl.sc.s
            lo, f_lo = _side_bound(dev, x0, _side_se(dev, x0, -h), -1.0, cutoff)
            hi, f_hi = _side_bound(dev, x0, _side_se(dev, x0, h), 1.0, cutoff)
            return lo, hi, f_lo + f_hi

        lo, hi, fl = scan(pl.ll_hat)
        best = max([v for v in cache.values() if np.isfinite(v)], default=-math.inf)
        if best > pl.ll_hat + 1e-6:
            flags.append("profile_improved_mle")
            pl.ll_hat = best
            lo, hi, fl = scan(best)
        flags.extend(fl)
        return ProfileInterval(float(lo), float(hi), confidence, cutoff, x0,
                               tuple(pl.skipped), tuple(flags))

    idx = pl.nuis[0]
    p0 = float(pl.theta_i[idx])

    def dev_p(p):
        v = pl.loglik_param(p)
        return max(2.0 * (pl.ll_hat - v), 0.0) if np.isfinite(v) else math.inf

    h = 0.05
    lo_p, f_lo = _side_bound(dev_p, p0, _side_se(dev_p, p0, -h), -1.0, cutoff)
    hi_p, f_hi = _side_bound(dev_p, p0, _side_se(dev_p, p0, h), 1.0, cutoff)
    flags.extend(f_lo + f_hi)

    def level(p):
        if not np.isfinite(p):
            th = pl.theta_i.copy()
            th[idx] = math.copysign(1e6, p)
            return float(pl._level_of(pl.sc.to_external(th))) if p < 0 else math.inf
        th = pl.theta_i.copy()
        th[idx] = p
        return float(pl._level_of(pl.sc.to_external(th)))

    a, b = level(lo_p), level(hi_p)
    return ProfileInterval(min(a, b), max(a, b), confidence, cutoff, pl.estimate,
                           tuple(pl.skipped), tuple(flags))


def profile_deviance(interval_source: ProfileLikelihood, x: float) -> float:
    return interval_source.deviance(x)


# --- trend model ------------------------------------------------------------------

def _series_data(years, values) -> LikData:
    x = np.ascontiguousarray(values, dtype=float)
    t = np.ascontiguousarray(years, dtype=float)
    m = x.size
    return LikData(np.empty(0), np.empty(0), x, t, np.zeros(m), np.zeros(m, dtype=np.int64),
                   np.zeros(m, dtype=np.bool_))


def _hessian(f, x, h):
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej)
                                 + f(x - ei - ej)) / (4.0 * h[i] * h[j])
    return H


def fit_trend(years, values, y: float, eval_year: Optional[float] = None,
              t0: Optional[float] = None, min_obs: int = 15):
    """Fit a GEV with location ``alpha0 + beta_trend * (year - t0)`` by standard likelihood.

    Returns ``(TrendFit, level)`` with the y-year level at ``eval_year``
    (default: the last year). The slope interval is Wald-type from the
    observed information; it is ``None`` when the Hessian is not positive
    definite.
    """
    years = np.asarray(years, dtype=float)
    values = np.asarray(values, dtype=float)
    if years.shape != values.shape or years.ndim != 1:
        raise ValueError("years and values must be matching vectors")
    if years.size < 5:
        raise ValueError("a trend fit needs at least five observations")
    if years.size < min_obs:
        warnings.warn(f"trend fitted to only {years.size} observations; slope estimates may be unrealistic",
                      stacklevel=2)
    t0 = float(years[0]) if t0 is None else float(t0)
    eval_year = float(years[-1]) if eval_year is None else float(eval_year)
    model = ModelSpec.gev_trend(t0)
    data = _series_data(years - t0, values)
    fit = mle(data, model, LikelihoodKind.STD)
    theta = fit.theta_hat

    sc = _scale(model, data, LikelihoodKind.STD)
    th_i = sc.to_internal(theta)
    all_idx = np.arange(4)

    def nll(z):
        return float(_core.negloglik(z, pack(sc.model, LikelihoodKind.STD, sc.data,
                                             template=z, free_idx=all_idx)))

    h = 1e-4 * np.maximum(np.abs(th_i), 1.0)
    H = _hessian(nll, th_i, h)
    ok = bool(np.all(np.isfinite(H)))
    ci, se = None, math.nan
    if ok:
        try:
            np.linalg.cholesky(H)
            cov = np.linalg.inv(H)
            se = math.sqrt(cov[1, 1]) * sc.s
            ci = (theta[1] - WALD_Z95 * se, theta[1] + WALD_Z95 * se)
        except np.linalg.LinAlgError:
            ok = False
    tf = TrendFit(float(theta[0]), float(theta[1]), float(theta[2]), float(theta[3]), ci, se,
                  t0, fit.max_loglik, fit.converged, ok, int(values.size))
    level = float(D.gev_return_level(y, D.GevParams(tf.location(eval_year), tf.sigma, tf.xi)))
    return tf, level


def trend_interval(fit: TrendFit, years, values, y: float, eval_year: float,
                   confidence: float = 0.95) -> ProfileInterval:
    """Profile interval for the trend model's y-year level at ``eval_year``."""
    model = ModelSpec.gev_trend(fit.t0)
    data = _series_data(np.asarray(years, dtype=float) - fit.t0, values)
    fr = FitResult(fit.theta, fit.max_loglik, fit.converged, 0, LikelihoodKind.STD, 0, model)
    return profile_ci_return_level(data, model, LikelihoodKind.STD, y, confidence, fit=fr,
                                   t_eval=eval_year)
