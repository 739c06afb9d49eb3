"""GEV, GPD, exponential and gamma distributions.

All functions accept scalars or arrays for ``x``. Shape parameters with
``|xi| < XI_EPS`` use the exact ``xi = 0`` branch, which avoids the
cancellation in ``(z**-xi - 1) / xi``. Log-densities return ``-inf``
outside the support instead of raising, so that likelihood code can treat
infeasible parameters as zero likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

XI_EPS = 1e-8


@dataclass(frozen=True)
class GevParams:
    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"GEV scale must be positive, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma, self.xi], dtype=float)


@dataclass(frozen=True)
class GpdParams:
    """Generalised Pareto model for exceedances of ``v``.

    ``tau_v`` is the expected number of exceedances of ``v`` per year and
    only enters return levels.
    """

    v: float
    sigma_v: float
    xi: float
    tau_v: float = 1.0

    def __post_init__(self):
        if not self.sigma_v > 0:
            raise ValueError(f"GPD scale must be positive, got {self.sigma_v}")
        if not self.tau_v > 0:
            raise ValueError(f"GPD exceedance rate must be positive, got {self.tau_v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma_v, self.xi], dtype=float)

    @classmethod
    def matching_gev(cls, xi: float, tau_v: float) -> "GpdParams":
        """GPD whose y-year level equals that of GEV(0, 1, xi) with ``log y`` in place of ``a_y``.

        Chooses ``v`` so that a GEV(0, 1, xi) annual maximum exceeds it
        ``tau_v`` times a year on average, then ``sigma_v = 1 + xi * v``.
        """
        if abs(xi) < XI_EPS:
            v = -np.log(tau_v)
        else:
            v = (tau_v ** (-xi) - 1.0) / xi
        return cls(v=v, sigma_v=1.0 + xi * v, xi=xi, tau_v=tau_v)


@dataclass(frozen=True)
class ExpParams:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"exponential rate must be positive, got {self.beta}")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta], dtype=float)


@dataclass(frozen=True)
class GammaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"gamma shape and rate must be positive, got {self.alpha}, {self.beta}")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta], dtype=float)


Params = Union[GevParams, GpdParams, ExpParams, GammaParams]


def _reduced(x, xi):
    """Return ``t = 1 + xi * x`` with the xi=0 flag broadcast."""
    x = np.asarray(x, dtype=float)
    return 1.0 + xi * x


# --- GEV -------------------------------------------------------------------

def gev_cdf(x, p: GevParams):
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    if abs(p.xi) < XI_EPS:
        return np.exp(-np.exp(-z))
    t = _reduced(z, p.xi)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.exp(-np.power(np.where(t > 0, t, 1.0), -1.0 / p.xi))
    below = 0.0 if p.xi > 0 else 1.0
    return np.where(t > 0, out, below)


def gev_sf(x, p: GevParams):
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    if abs(p.xi) < XI_EPS:
        return -np.expm1(-np.exp(-z))
    t = _reduced(z, p.xi)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = -np.expm1(-np.power(np.where(t > 0, t, 1.0), -1.0 / p.xi))
    outside = 1.0 if p.xi > 0 else 0.0
    return np.where(t > 0, out, outside)


def gev_logpdf(x, p: GevParams):
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    if abs(p.xi) < XI_EPS:
        return -np.log(p.sigma) - z - np.exp(-z)
    t = _reduced(z, p.xi)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lt = np.log(np.where(t > 0, t, 1.0))
        out = -np.log(p.sigma) - (1.0 / p.xi + 1.0) * lt - np.exp(-lt / p.xi)
    return np.where(t > 0, out, -np.inf)


def _gev_reduced_quantile(logq, xi):
    # minus log of a cdf value is exp(logq); return the standard GEV quantile
    if abs(xi) < XI_EPS:
        return -logq
    return np.expm1(-xi * logq) / xi


def gev_quantile(prob, p: GevParams):
    prob = np.asarray(prob, dtype=float)
    if np.any((prob <= 0) | (prob >= 1)):
        raise ValueError("quantile probabilities must lie in (0, 1)")
    logq = np.log(-np.log(prob))
    return p.mu + p.sigma * _gev_reduced_quantile(logq, p.xi)


def gev_return_level(y, p: GevParams):
    """Level exceeded on average once every ``y`` years by an annual maximum."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 1):
        raise ValueError("return period must exceed one year")
    logq = np.log(-np.log1p(-1.0 / y))
    return p.mu + p.sigma * _gev_reduced_quantile(logq, p.xi)


def gev_upper_endpoint(p: GevParams) -> float:
    return p.mu - p.sigma / p.xi if p.xi <= -XI_EPS else np.inf


# --- GPD (x is the exceedance above v) ------------------------------------

def gpd_sf(x, p: GpdParams):
    x = np.asarray(x, dtype=float)
    if abs(p.xi) < XI_EPS:
        out = np.exp(-np.maximum(x, 0.0) / p.sigma_v)
    else:
        t = 1.0 + p.xi * np.maximum(x, 0.0) / p.sigma_v
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t > 0, np.power(np.where(t > 0, t, 1.0), -1.0 / p.xi), 0.0)
    return out


def gpd_cdf(x, p: GpdParams):
    return 1.0 - gpd_sf(x, p)


def gpd_logpdf(x, p: GpdParams):
    x = np.asarray(x, dtype=float)
    if abs(p.xi) < XI_EPS:
        out = -np.log(p.sigma_v) - x / p.sigma_v
        return np.where(x >= 0, out, -np.inf)
    t = 1.0 + p.xi * x / p.sigma_v
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.log(p.sigma_v) - (1.0 / p.xi + 1.0) * np.log(np.where(t > 0, t, 1.0))
    return np.where((x >= 0) & (t > 0), out, -np.inf)


def gpd_quantile(prob, p: GpdParams):
    """Quantile of the exceedance ``X - v`` (not of the level)."""
    prob = np.asarray(prob, dtype=float)
    if np.any((prob < 0) | (prob >= 1)):
        raise ValueError("quantile probabilities must lie in [0, 1)")
    lsf = np.log1p(-prob)
    if abs(p.xi) < XI_EPS:
        return -p.sigma_v * lsf
    return p.sigma_v * np.expm1(-p.xi * lsf) / p.xi


def gpd_return_level(y, p: GpdParams):
    y = np.asarray(y, dtype=float)
    yt = y * p.tau_v
    if np.any(yt < 1):
        raise ValueError("need y * tau_v >= 1")
    lyt = np.log(yt)
    if abs(p.xi) < XI_EPS:
        return p.v + p.sigma_v * lyt
    return p.v + p.sigma_v * np.expm1(p.xi * lyt) / p.xi


# --- exponential and gamma --------------------------------------------------

def exp_logpdf(x, p: ExpParams):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, np.log(p.beta) - p.beta * x, -np.inf)


def exp_cdf(x, p: ExpParams):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, -np.expm1(-p.beta * np.maximum(x, 0.0)), 0.0)


def exp_quantile(prob, p: ExpParams):
    return -np.log1p(-np.asarray(prob, dtype=float)) / p.beta


def exp_return_level(y, p: ExpParams):
    return np.log(np.asarray(y, dtype=float)) / p.beta


def gamma_logpdf(x, p: GammaParams):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (p.alpha * np.log(p.beta) + special.xlogy(p.alpha - 1.0, x)
               - p.beta * x - special.gammaln(p.alpha))
    return np.where(x >= 0, out, -np.inf)


def gamma_cdf(x, p: GammaParams):
    x = np.asarray(x, dtype=float)
    return special.gammainc(p.alpha, p.beta * np.maximum(x, 0.0))


def gamma_quantile(prob, p: GammaParams):
    return special.gammaincinv(p.alpha, np.asarray(prob, dtype=float)) / p.beta


def gamma_return_level(y, p: GammaParams):
    return gamma_quantile(1.0 - 1.0 / np.asarray(y, dtype=float), p)


# --- generic dispatch -------------------------------------------------------

def cdf(p: Params, x):
    if isinstance(p, GevParams):
        return gev_cdf(x, p)
    if isinstance(p, GpdParams):
        return gpd_cdf(np.asarray(x, dtype=float) - p.v, p)
    if isinstance(p, ExpParams):
        return exp_cdf(x, p)
    return gamma_cdf(x, p)


def sf(p: Params, x):
    if isinstance(p, GevParams):
        return gev_sf(x, p)
    if isinstance(p, GpdParams):
        return gpd_sf(np.asarray(x, dtype=float) - p.v, p)
    return 1.0 - cdf(p, x)


def logpdf(p: Params, x):
    if isinstance(p, GevParams):
        return gev_logpdf(x, p)
    if isinstance(p, GpdParams):
        return gpd_logpdf(np.asarray(x, dtype=float) - p.v, p)
    if isinstance(p, ExpParams):
        return exp_logpdf(x, p)
    return gamma_logpdf(x, p)


def quantile(p: Params, prob):
    """Quantile of the level (for a GPD, ``v`` plus the exceedance quantile)."""
    if isinstance(p, GevParams):
        return gev_quantile(prob, p)
    if isinstance(p, GpdParams):
        return p.v + gpd_quantile(prob, p)
    if isinstance(p, ExpParams):
        return exp_quantile(prob, p)
    return gamma_quantile(prob, p)


def return_level(p: Params, y):
    if isinstance(p, GevParams):
        return gev_return_level(y, p)
    if isinstance(p, GpdParams):
        return gpd_return_level(y, p)
    if isinstance(p, ExpParams):
        return exp_return_level(y, p)
    return gamma_return_level(y, p)


def sample(rng: np.random.Generator, p: Params, n: int) -> np.ndarray:
    """Draw ``n`` values by inverse-CDF sampling (gamma: numpy's rejection sampler).

    GPD draws are levels ``v + exceedance``.
    """
    if isinstance(p, GammaParams):
        return rng.gamma(p.alpha, 1.0 / p.beta, size=n)
    u = rng.random(n)
    if isinstance(p, GevParams):
        # -log G(x) = -log(u) is standard exponential
        logq = np.log(-np.log(u))
        return p.mu + p.sigma * _gev_reduced_quantile(logq, p.xi)
    if isinstance(p, GpdParams):
        return p.v + gpd_quantile(u, p)
    return -np.log1p(-u) / p.beta
