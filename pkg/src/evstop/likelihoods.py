"""Standard, exclude, conditional and truncated log-likelihoods for stopped samples.

Every likelihood adds the historical penalty (the summed log-density of
the historical values). Infeasible parameters give ``-inf``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from evstop import _core
from evstop import _kernels as K
from evstop.stopping import GpdStoppedSample, HistoricalData, StoppedSample


class LikelihoodKind(enum.Enum):
    STD = "std"
    EX = "ex"
    FC = "fc"
    PC = "pc"
    TRUNC = "trunc"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @classmethod
    def parse(cls, text: Union[str, "LikelihoodKind"]) -> "LikelihoodKind":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"unknown likelihood kind {text!r}") from None


_KIND_CODES = {
    LikelihoodKind.STD: _core.STD,
    LikelihoodKind.EX: _core.EX,
    LikelihoodKind.FC: _core.FC,
    LikelihoodKind.PC: _core.PC,
    LikelihoodKind.TRUNC: _core.TRUNC,
}

ALL_KINDS = tuple(LikelihoodKind)

_FAMILIES = {
    "gev": (K.GEV, ("mu", "sigma", "xi")),
    "gpd": (K.GPD, ("sigma_v", "xi")),
    "exp": (K.EXP, ("beta",)),
    "gamma": (K.GAMMA, ("beta",)),
    "gev_trend": (K.GEV_TREND, ("alpha0", "slope", "sigma", "xi")),
}


@dataclass(frozen=True)
class ModelSpec:
    """Distribution family plus any parameters held fixed during fitting.

    ``v`` is the GPD modelling threshold and ``alpha`` the known gamma shape.
    For the trend family the covariate is ``t - t0`` with ``t`` taken from
    the sample's time vectors.
    """

    family: str
    fixed: Mapping[str, float] = field(default_factory=dict)
    v: float = 0.0
    alpha: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "fixed", dict(self.fixed))
        unknown = set(self.fixed) - set(self.param_names)
        if unknown:
            raise ValueError(f"cannot fix {sorted(unknown)} for family {self.family}")
        if self.family == "gamma" and not self.alpha > 0:
            raise ValueError("gamma shape must be positive")

    @classmethod
    def gev(cls, **fixed) -> "ModelSpec":
        return cls("gev", fixed)

    @classmethod
    def gev_idealized(cls) -> "ModelSpec":
        """GEV with location 0 and scale 1 known; only the shape is fitted."""
        return cls("gev", {"mu": 0.0, "sigma": 1.0})

    @classmethod
    def gpd(cls, v: float, **fixed) -> "ModelSpec":
        return cls("gpd", fixed, v=float(v))

    @classmethod
    def exponential(cls) -> "ModelSpec":
        return cls("exp")

    @classmethod
    def gamma(cls, alpha: float) -> "ModelSpec":
        return cls("gamma", alpha=float(alpha))

    @classmethod
    def gev_trend(cls, t0: float = 0.0) -> "ModelSpec":
        return cls("gev_trend", t0=float(t0))

    @property
    def code(self) -> int:
        return _FAMILIES[self.family][0]

    @property
    def param_names(self) -> tuple:
        return _FAMILIES[self.family][1]

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def free_idx(self) -> np.ndarray:
        return np.array([i for i, n in enumerate(self.param_names) if n not in self.fixed],
                        dtype=np.int64)

    @property
    def n_free(self) -> int:
        return int(self.free_idx.size)

    def template(self, theta=None) -> np.ndarray:
        """Full parameter vector with fixed entries filled in."""
        th = np.zeros(self.n_params) if theta is None else np.array(theta, dtype=float)
        if th.shape != (self.n_params,):
            raise ValueError(f"{self.family} takes {self.n_params} parameters, got {th.shape}")
        for i, name in enumerate(self.param_names):
            if name in self.fixed:
                th[i] = self.fixed[name]
        return th

    def consts(self) -> np.ndarray:
        return np.array([self.v, self.alpha], dtype=float)


@dataclass(frozen=True)
class LikData:
    """Flattened sample in the layout the compiled core expects."""

    hist: np.ndarray
    t_hist: np.ndarray
    obs: np.ndarray
    t_obs: np.ndarray
    thr: np.ndarray
    role: np.ndarray
    drop_ex: np.ndarray
    tau: float = float("nan")
    tau_ex: float = float("nan")


SampleLike = Union[StoppedSample, GpdStoppedSample, np.ndarray, HistoricalData]


def lik_data(sample: SampleLike, t0: float = 0.0) -> LikData:
    """Convert any supported sample into :class:`LikData`.

    A plain array is treated as a fixed-size sample with no stopping terms.
    """
    if isinstance(sample, StoppedSample):
        n = sample.n
        role = np.ones(n, dtype=np.int64)
        for i in sample.exempt:
            role[i] = 0
        role[-1] = 2
        drop = np.zeros(n, dtype=np.bool_)
        drop[-1] = True
        h = sample.historical
        t_hist = h.t - t0 if h.t is not None else np.zeros(h.n0)
        t_obs = sample.t_obs - t0 if sample.t_obs is not None else np.zeros(n)
        return LikData(h.values, np.ascontiguousarray(t_hist, dtype=float), sample.obs,
                       np.ascontiguousarray(t_obs, dtype=float), sample.thresholds, role, drop)
    if isinstance(sample, GpdStoppedSample):
        n0 = sample.n0
        obs = sample.values[n0:]
        m = obs.size
        role = np.zeros(m, dtype=np.int64)
        trig = sample.trigger - n0
        role[:trig] = 1
        role[trig] = 2
        drop = sample.final_year_mask[n0:].copy()
        return LikData(sample.values[:n0].copy(), np.zeros(n0), obs.copy(), np.zeros(m),
                       np.full(m, sample.c), role, drop,
                       tau=sample.tau_hat(), tau_ex=sample.tau_hat(drop_final_year=True))
    if isinstance(sample, HistoricalData):
        sample = sample.values
    x = np.ascontiguousarray(sample, dtype=float)
    if x.ndim != 1:
        raise ValueError("observations must be one-dimensional")
    m = x.size
    return LikData(np.empty(0), np.empty(0), x, np.zeros(m), np.zeros(m),
                   np.zeros(m, dtype=np.int64), np.zeros(m, dtype=np.bool_))


def pack(model: ModelSpec, kind: LikelihoodKind, data: LikData,
         template: Optional[np.ndarray] = None, free_idx: Optional[np.ndarray] = None,
         prof: Optional[np.ndarray] = None) -> tuple:
    kind = LikelihoodKind.parse(kind)
    if template is None:
        template = model.template()
    if free_idx is None:
        free_idx = model.free_idx
    if prof is None:
        prof = np.zeros(5)
    return (np.int64(model.code), np.int64(kind.code), np.asarray(template, dtype=float),
            np.asarray(free_idx, dtype=np.int64), model.consts(), np.asarray(prof, dtype=float),
            data.hist, data.t_hist, data.obs, data.t_obs, data.thr, data.role, data.drop_ex)


def _evaluate(theta, model: ModelSpec, kind, data: LikData) -> float:
    th = np.asarray(theta, dtype=float)
    if th.shape != (model.n_params,):
        raise ValueError(f"{model.family} takes {model.n_params} parameters, got {th.shape}")
    all_idx = np.arange(model.n_params, dtype=np.int64)
    args = pack(model, kind, data, template=th, free_idx=all_idx)
    return -float(_core.negloglik(th, args))


def loglik(theta, model: ModelSpec, sample: SampleLike,
           kind: Union[LikelihoodKind, str] = LikelihoodKind.STD) -> float:
    """Log-likelihood of ``kind`` plus the historical penalty, at the full vector ``theta``."""
    return _evaluate(theta, model, kind, lik_data(sample, model.t0))


def historical_penalty(theta, model: ModelSpec, historical: HistoricalData) -> float:
    h = historical.values
    t = historical.t - model.t0 if historical.t is not None else np.zeros(h.size)
    data = LikData(h, np.ascontiguousarray(t, dtype=float), np.empty(0), np.empty(0),
                   np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.bool_))
    return _evaluate(theta, model, LikelihoodKind.STD, data)


def loglik_fixed_n(theta, model: ModelSpec, observations, t=None) -> float:
    """Plain fixed-sample log-likelihood: no stopping terms and no penalty."""
    x = np.ascontiguousarray(observations, dtype=float)
    tt = np.zeros(x.size) if t is None else np.asarray(t, dtype=float) - model.t0
    data = LikData(np.empty(0), np.empty(0), x, np.ascontiguousarray(tt), np.zeros(x.size),
                   np.zeros(x.size, dtype=np.int64), np.zeros(x.size, dtype=np.bool_))
    return _evaluate(theta, model, LikelihoodKind.STD, data)
