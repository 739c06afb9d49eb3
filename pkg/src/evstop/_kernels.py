"""Scalar numba kernels shared by the likelihood core.

Everything here works on plain floats so it can be called from inside
jitted loops. The public, vectorised versions live in
:mod:`evstop.distributions`; tests cross-check the two.
"""

import math

import numpy as np
from numba import njit

XI_EPS = 1e-8

GEV = 0
GPD = 1
EXP = 2
GAMMA = 3
GEV_TREND = 4

NEG_INF = -np.inf

_GAM_EPS = 1e-15
_GAM_TINY = 1e-300
_GAM_MAXIT = 10000


@njit(cache=True)
def log_gammainc_lower_series(a, x):
    # log P(a, x) by the power series; good for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_GAM_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAM_EPS:
            break
    return math.log(total) - x + a * math.log(x) - math.lgamma(a)


@njit(cache=True)
def log_gammainc_upper_cf(a, x):
    # log Q(a, x) by the modified Lentz continued fraction; good for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _GAM_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _GAM_MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _GAM_TINY:
            d = _GAM_TINY
        c = b + an / c
        if abs(c) < _GAM_TINY:
            c = _GAM_TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _GAM_EPS:
            break
    return math.log(h) - x + a * math.log(x) - math.lgamma(a)


@njit(cache=True)
def log_gammainc(a, x):
    """Return (log P(a, x), log Q(a, x)) for the regularised incomplete gamma."""
    if x <= 0.0:
        return NEG_INF, 0.0
    if x < a + 1.0:
        lp = log_gammainc_lower_series(a, x)
        return lp, math.log1p(-math.exp(lp)) if lp < 0.0 else NEG_INF
    lq = log_gammainc_upper_cf(a, x)
    return math.log1p(-math.exp(lq)) if lq < 0.0 else NEG_INF, lq


@njit(cache=True)
def _log1mexp(lx):
    # log(1 - exp(lx)) for lx <= 0
    if lx > -0.6931471805599453:
        return math.log(-math.expm1(lx))
    return math.log1p(-math.exp(lx))


# --- GEV -------------------------------------------------------------------

@njit(cache=True)
def gev_logpdf(x, mu, sigma, xi):
    z = (x - mu) / sigma
    if abs(xi) < XI_EPS:
        return -math.log(sigma) - z - math.exp(-z)
    t = 1.0 + xi * z
    if t <= 0.0:
        return NEG_INF
    lt = math.log(t)
    return -math.log(sigma) - (1.0 / xi + 1.0) * lt - math.exp(-lt / xi)


@njit(cache=True)
def gev_logcdf(x, mu, sigma, xi):
    z = (x - mu) / sigma
    if abs(xi) < XI_EPS:
        return -math.exp(-z)
    t = 1.0 + xi * z
    if t <= 0.0:
        return NEG_INF if xi > 0.0 else 0.0
    return -math.exp(-math.log(t) / xi)


@njit(cache=True)
def gev_logsf(x, mu, sigma, xi):
    z = (x - mu) / sigma
    if abs(xi) < XI_EPS:
        logu = -z
    else:
        t = 1.0 + xi * z
        if t <= 0.0:
            return 0.0 if xi > 0.0 else NEG_INF
        logu = -math.log(t) / xi
    # survivor is 1 - exp(-u) with u = exp(logu)
    if logu < -20.0:
        return logu - 0.5 * math.exp(logu)
    return math.log(-math.expm1(-math.exp(logu)))


# --- GPD (argument is the exceedance x - v) --------------------------------

@njit(cache=True)
def gpd_logpdf(y, sigma, xi):
    if y < 0.0:
        return NEG_INF
    if abs(xi) < XI_EPS:
        return -math.log(sigma) - y / sigma
    t = 1.0 + xi * y / sigma
    if t <= 0.0:
        return NEG_INF
    return -math.log(sigma) - (1.0 / xi + 1.0) * math.log(t)


@njit(cache=True)
def gpd_logsf(y, sigma, xi):
    if y <= 0.0:
        return 0.0
    if abs(xi) < XI_EPS:
        return -y / sigma
    t = 1.0 + xi * y / sigma
    if t <= 0.0:
        return NEG_INF
    return -math.log(t) / xi


@njit(cache=True)
def gpd_logcdf(y, sigma, xi):
    ls = gpd_logsf(y, sigma, xi)
    if ls == 0.0:
        return NEG_INF
    if ls == NEG_INF:
        return 0.0
    return _log1mexp(ls)


# --- exponential / gamma ------------------------------------------------------

@njit(cache=True)
def exp_logpdf(x, beta):
    if x < 0.0:
        return NEG_INF
    return math.log(beta) - beta * x


@njit(cache=True)
def exp_logsf(x, beta):
    if x <= 0.0:
        return 0.0
    return -beta * x


@njit(cache=True)
def exp_logcdf(x, beta):
    if x <= 0.0:
        return NEG_INF
    return _log1mexp(-beta * x)


@njit(cache=True)
def gamma_logpdf(x, alpha, beta):
    if x < 0.0 or (x == 0.0 and alpha < 1.0):
        return NEG_INF
    if x == 0.0:
        return math.log(beta) if alpha == 1.0 else NEG_INF
    return (alpha * math.log(beta) + (alpha - 1.0) * math.log(x)
            - beta * x - math.lgamma(alpha))


@njit(cache=True)
def gamma_logcdf(x, alpha, beta):
    return log_gammainc(alpha, beta * x)[0]


@njit(cache=True)
def gamma_logsf(x, alpha, beta):
    return log_gammainc(alpha, beta * x)[1]


# --- family dispatch ----------------------------------------------------------
# theta layouts:
#   GEV        (mu, sigma, xi)
#   GPD        (sigma_v, xi)            consts[0] = v
#   EXP        (beta,)
#   GAMMA      (beta,)                  consts[1] = alpha
#   GEV_TREND  (alpha0, slope, sigma, xi)  mu_t = alpha0 + slope * t

@njit(cache=True)
def point_logpdf(fam, th, consts, x, t):
    if fam == GEV:
        return gev_logpdf(x, th[0], th[1], th[2])
    if fam == GEV_TREND:
        return gev_logpdf(x, th[0] + th[1] * t, th[2], th[3])
    if fam == GPD:
        return gpd_logpdf(x - consts[0], th[0], th[1])
    if fam == EXP:
        return exp_logpdf(x, th[0])
    return gamma_logpdf(x, consts[1], th[0])


@njit(cache=True)
def point_logcdf(fam, th, consts, x, t):
    if fam == GEV:
        return gev_logcdf(x, th[0], th[1], th[2])
    if fam == GEV_TREND:
        return gev_logcdf(x, th[0] + th[1] * t, th[2], th[3])
    if fam == GPD:
        return gpd_logcdf(x - consts[0], th[0], th[1])
    if fam == EXP:
        return exp_logcdf(x, th[0])
    return gamma_logcdf(x, consts[1], th[0])


@njit(cache=True)
def point_logsf(fam, th, consts, x, t):
    if fam == GEV:
        return gev_logsf(x, th[0], th[1], th[2])
    if fam == GEV_TREND:
        return gev_logsf(x, th[0] + th[1] * t, th[2], th[3])
    if fam == GPD:
        return gpd_logsf(x - consts[0], th[0], th[1])
    if fam == EXP:
        return exp_logsf(x, th[0])
    return gamma_logsf(x, consts[1], th[0])


@njit(cache=True)
def scale_ok(fam, th):
    if fam == GEV:
        return th[1] > 0.0
    if fam == GEV_TREND:
        return th[2] > 0.0
    return th[0] > 0.0
