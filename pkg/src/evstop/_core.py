"""Compiled negative log-likelihood shared by every fitting path.

Argument tuple layout (built by :func:`evstop.likelihoods.pack`)::

    (fam, kind, template, free_idx, consts, prof,
     hist, t_hist, obs, t_obs, thr, role, drop_ex)

``role`` marks each observation: 0 plain, 1 conditioned on being at or
below its threshold (full conditioning only), 2 the stopping observation.
``prof`` switches on return-level reparameterisation for profiling:
``[active, x_y, y, aux, t_eval]`` where ``aux`` is the GPD exceedance
rate or the standard-gamma quantile.
"""

import math

import numpy as np
from numba import njit

from evstop import _kernels as K
from evstop.optimize import specialize

STD = 0
EX = 1
FC = 2
PC = 3
TRUNC = 4


@njit(cache=True)
def solve_anchor(fam, th, consts, prof):
    """Overwrite ``th[0]`` so the y-year level equals ``prof[1]``."""
    xy = prof[1]
    y = prof[2]
    if fam == K.GEV or fam == K.GEV_TREND:
        if fam == K.GEV:
            sigma, xi = th[1], th[2]
        else:
            sigma, xi = th[2], th[3]
        if sigma <= 0.0:
            return False
        loga = math.log(-math.log1p(-1.0 / y))
        if abs(xi) < K.XI_EPS:
            mu = xy + sigma * loga
        else:
            mu = xy - sigma * math.expm1(-xi * loga) / xi
        if fam == K.GEV:
            th[0] = mu
        else:
            th[0] = mu - th[1] * prof[4]
        return True
    if fam == K.GPD:
        yt = y * prof[3]
        if yt <= 1.0:
            return False
        lyt = math.log(yt)
        xi = th[1]
        if abs(xi) < K.XI_EPS:
            den = lyt
        else:
            den = math.expm1(xi * lyt) / xi
        th[0] = (xy - consts[0]) / den
        return th[0] > 0.0
    if xy <= 0.0:
        return False
    if fam == K.EXP:
        th[0] = math.log(y) / xy
    else:
        th[0] = prof[3] / xy
    return True


@njit(cache=True)
def _gpd_fast(sigma, xi, v, kind, hist, obs, thr, role, drop_ex):
    # log sigma and 1/xi hoisted out of the per-point loop
    ls = math.log(sigma)
    r = xi / sigma
    pw = 1.0 / xi + 1.0
    total = 0.0
    m = 0
    last_thr = np.nan
    last_val = 0.0
    for j in range(hist.shape[0]):
        y = hist[j] - v
        t = 1.0 + r * y
        if y < 0.0 or t <= 0.0:
            return -np.inf
        total -= pw * math.log(t)
        m += 1
    for i in range(obs.shape[0]):
        if kind == EX and drop_ex[i]:
            continue
        y = obs[i] - v
        t = 1.0 + r * y
        if y < 0.0 or t <= 0.0:
            return -np.inf
        total -= pw * math.log(t)
        m += 1
        rl = role[i]
        if rl == 1 and kind == FC:
            if thr[i] != last_thr:
                last_thr = thr[i]
                last_val = K.gpd_logcdf(thr[i] - v, sigma, xi)
            total -= last_val
        elif rl == 2 and (kind == FC or kind == PC):
            total -= K.gpd_logsf(thr[i] - v, sigma, xi)
    return total - m * ls


@njit(cache=True)
def _gev_fast(mu, sigma, xi, kind, hist, obs, thr, role, drop_ex):
    ls = math.log(sigma)
    r = xi / sigma
    pw = 1.0 / xi + 1.0
    nix = -1.0 / xi
    total = 0.0
    m = 0
    last_thr = np.nan
    last_val = 0.0
    for j in range(hist.shape[0]):
        t = 1.0 + r * (hist[j] - mu)
        if t <= 0.0:
            return -np.inf
        lt = math.log(t)
        total -= pw * lt + math.exp(nix * lt)
        m += 1
    for i in range(obs.shape[0]):
        if kind == EX and drop_ex[i]:
            continue
        t = 1.0 + r * (obs[i] - mu)
        if t <= 0.0:
            return -np.inf
        lt = math.log(t)
        total -= pw * lt + math.exp(nix * lt)
        m += 1
        rl = role[i]
        if rl == 1 and kind == FC:
            if thr[i] != last_thr:
                last_thr = thr[i]
                last_val = K.gev_logcdf(thr[i], mu, sigma, xi)
            total -= last_val
        elif rl == 2 and (kind == FC or kind == PC):
            total -= K.gev_logsf(thr[i], mu, sigma, xi)
    return total - m * ls


@njit(cache=True)
def negloglik(x, args):
    (fam, kind, template, free_idx, consts, prof,
     hist, t_hist, obs, t_obs, thr, role, drop_ex) = args
    th = template.copy()
    for j in range(free_idx.shape[0]):
        th[free_idx[j]] = x[j]
    if prof[0] > 0.0:
        if not solve_anchor(fam, th, consts, prof):
            return np.inf
    if not K.scale_ok(fam, th):
        return np.inf

    total = 0.0
    if fam == K.EXP:
        # sufficient statistics keep the exponential case cheap
        beta = th[0]
        lb = math.log(beta)
        for j in range(hist.shape[0]):
            if hist[j] < 0.0:
                return np.inf
            total += lb - beta * hist[j]
        for i in range(obs.shape[0]):
            r = role[i]
            if kind == EX and drop_ex[i]:
                continue
            xv = thr[i] if (kind == TRUNC and r == 2) else obs[i]
            if xv < 0.0:
                return np.inf
            total += lb - beta * xv
            if r == 1 and kind == FC:
                total -= K.exp_logcdf(thr[i], beta)
            elif r == 2 and (kind == FC or kind == PC):
                total += beta * thr[i] if thr[i] > 0.0 else 0.0
    elif fam == K.GPD and kind != TRUNC and abs(th[1]) >= K.XI_EPS:
        total = _gpd_fast(th[0], th[1], consts[0], kind, hist, obs, thr, role, drop_ex)
    elif fam == K.GEV and kind != TRUNC and abs(th[2]) >= K.XI_EPS:
        total = _gev_fast(th[0], th[1], th[2], kind, hist, obs, thr, role, drop_ex)
    else:
        for j in range(hist.shape[0]):
            total += K.point_logpdf(fam, th, consts, hist[j], t_hist[j])
        if total == -np.inf:
            return np.inf
        for i in range(obs.shape[0]):
            r = role[i]
            if kind == EX and drop_ex[i]:
                continue
            if kind == TRUNC and r == 2:
                total += K.point_logpdf(fam, th, consts, thr[i], t_obs[i])
            else:
                total += K.point_logpdf(fam, th, consts, obs[i], t_obs[i])
            if r == 1 and kind == FC:
                total -= K.point_logcdf(fam, th, consts, thr[i], t_obs[i])
            elif r == 2 and (kind == FC or kind == PC):
                total -= K.point_logsf(fam, th, consts, thr[i], t_obs[i])
            if total == -np.inf:
                return np.inf
    if not np.isfinite(total):
        return np.inf
    return -total


simplex_nll, multistart_nll = specialize(negloglik)


@njit(cache=True)
def fit(inits, step, args, xatol, fatol, maxfev, agree_tol, early_stop, polish):
    """Multi-start minimisation of :func:`negloglik`; see ``multistart_minimize``."""
    if inits.shape[1] == 0:
        f = negloglik(inits[0], args)
        return inits[0].copy(), f, 1, 1, np.isfinite(f), 1 if np.isfinite(f) else 0
    return multistart_nll(inits, step, args, xatol, fatol, maxfev, agree_tol, early_stop,
                          polish)


@njit(cache=True)
def negloglik_many(xs, args):
    out = np.empty(xs.shape[0])
    for r in range(xs.shape[0]):
        out[r] = negloglik(xs[r], args)
    return out
