import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from evstop import distributions as D
from evstop import stopping as S
from evstop.likelihoods import ALL_KINDS, LikelihoodKind, ModelSpec, historical_penalty, loglik, loglik_fixed_n

EXP = ModelSpec.exponential()
GEV = ModelSpec.gev()


def two_point():
    return S.StoppedSample(S.HistoricalData.empty(), [0.5, 3.0], [2.0, 2.0], S.StoppingRule.fixed(2.0))


def test_two_point_exponential_examples():
    s = two_point()
    want = {"std": -3.5, "pc": -1.5, "fc": -1.5 - math.log(1 - math.exp(-2)), "ex": -0.5,
            "trunc": -2.5}
    for kind, value in want.items():
        assert loglik([1.0], EXP, s, kind) == pytest.approx(value, abs=1e-12)
    assert loglik([1.0], EXP, s, "fc") == pytest.approx(-1.35459, abs=1e-5)
    assert loglik_fixed_n([1.0], EXP, [0.5, 3.0]) == pytest.approx(-3.5, abs=1e-12)


def test_kind_parsing():
    assert LikelihoodKind.parse("FC") is LikelihoodKind.FC
    assert LikelihoodKind.parse(LikelihoodKind.EX) is LikelihoodKind.EX
    with pytest.raises(ValueError):
        LikelihoodKind.parse("bayes")
    assert len(ALL_KINDS) == 5


def test_invalid_theta_is_minus_inf():
    s = two_point()
    for kind in ALL_KINDS:
        assert loglik([-1.0], EXP, s, kind) == -math.inf
    g = S.StoppedSample(S.HistoricalData.empty(), [0.1, -6.0, 9.0], [8.0] * 3, S.StoppingRule.fixed(8.0))
    assert loglik([0.0, 1.0, 0.2], GEV, g, "std") == -math.inf
    assert loglik([0.0, -1.0, 0.2], GEV, g, "std") == -math.inf
    with pytest.raises(ValueError):
        loglik([0.0, 1.0], GEV, g, "std")


def test_historical_penalty():
    p = [0.0, 1.0, 0.2]
    assert historical_penalty(p, GEV, S.HistoricalData.empty()) == 0.0
    # GEV(0, 1, 0.2) mode at ((1 + xi)^-xi - 1) / xi
    mode = (1.2 ** -0.2 - 1) / 0.2
    assert mode == pytest.approx(-0.17903747998686400, rel=1e-14)
    assert historical_penalty(p, GEV, S.HistoricalData([mode])) == pytest.approx(-0.98121413184725445,
                                                                               rel=1e-12)
    a, b = S.HistoricalData([0.3, 1.1]), S.HistoricalData([2.5, -0.4, 0.0])
    both = S.HistoricalData(np.concatenate([a.values, b.values]))
    assert historical_penalty(p, GEV, both) == pytest.approx(
        historical_penalty(p, GEV, a) + historical_penalty(p, GEV, b), rel=1e-13)


def gev_oracle(theta, s, kind):
    ref = stats.genextreme(c=-theta[2], loc=theta[0], scale=theta[1])
    x, thr = s.obs, s.thresholds
    hist = ref.logpdf(s.historical.values).sum()
    if kind == "ex":
        return hist + ref.logpdf(x[:-1]).sum()
    if kind == "trunc":
        return hist + ref.logpdf(np.append(x[:-1], thr[-1])).sum()
    std = hist + ref.logpdf(x).sum()
    if kind == "std" or std == -np.inf:
        return std
    pc = std - ref.logsf(thr[-1])
    if kind == "pc":
        return pc
    keep = np.array([i not in s.exempt for i in range(s.n - 1)], dtype=bool)
    return pc - ref.logcdf(thr[:-1][keep]).sum()


@given(seed=st.integers(0, 10_000), xi=st.floats(-0.3, 0.6), mu=st.floats(-0.5, 0.5),
       sigma=st.floats(0.6, 1.8))
def test_gev_kinds_match_scipy(seed, xi, mu, sigma):
    rng = np.random.default_rng(seed)
    h = S.make_historical(D.GevParams(0, 1, 0.2), 10)
    s = S.run_fixed(rng, D.GevParams(0, 1, 0.2), 4.0, historical=h)
    theta = [mu, sigma, xi]
    for kind in ["std", "ex", "fc", "pc", "trunc"]:
        want = gev_oracle(theta, s, kind)
        got = loglik(theta, GEV, s, kind)
        if np.isfinite(want):
            assert got == pytest.approx(want, rel=1e-9, abs=1e-9)
        else:
            assert got == -math.inf


@given(seed=st.integers(0, 10_000), theta=st.tuples(st.floats(-1, 1), st.floats(0.3, 3), st.floats(-0.4, 0.7)))
def test_pc_minus_std_is_minus_log_survival(seed, theta):
    s = S.run_fixed(np.random.default_rng(seed), D.GevParams(0, 1, 0.2), 3.0)
    std, pc = loglik(theta, GEV, s, "std"), loglik(theta, GEV, s, "pc")
    if np.isfinite(std):
        sf = float(D.gev_sf(3.0, D.GevParams(*theta)))
        assert pc - std == pytest.approx(-math.log(sf), rel=1e-9, abs=1e-12)
        assert pc - std >= 0


def test_survival_at_threshold_increasing_in_xi():
    sf = [float(D.gev_sf(4.0, D.GevParams(0, 1, xi))) for xi in np.linspace(-0.2, 0.8, 11)]
    assert np.all(np.diff(sf) > 0)


def test_exempt_index_matches_std_term():
    obs = np.array([0.2, 2.6, 0.7, 3.1])
    thr = np.full(4, 2.5)
    plain = S.StoppedSample(S.HistoricalData.empty(), obs, thr, S.StoppingRule.fixed(2.5), exempt={1})
    theta = [1.0]
    fc = loglik(theta, EXP, plain, "fc")
    std = loglik(theta, EXP, plain, "std")
    logF = math.log1p(-math.exp(-2.5))
    # two non-exempt earlier indices condition, the exempt one does not
    assert fc == pytest.approx(std + 2.5 - 2 * logF, rel=1e-12)
    assert loglik(theta, EXP, plain, "pc") == pytest.approx(std + 2.5, rel=1e-12)


def test_exempt_changes_fc_only():
    obs = np.array([0.2, 1.7, 0.7, 3.1])
    thr = np.full(4, 2.5)
    rule = S.StoppingRule.fixed(2.5)
    base = S.StoppedSample(S.HistoricalData.empty(), obs, thr, rule)
    ex = S.StoppedSample(S.HistoricalData.empty(), obs, thr, rule, exempt={1})
    for kind in ["std", "ex", "pc", "trunc"]:
        assert loglik([0.8], EXP, base, kind) == loglik([0.8], EXP, ex, kind)
    assert loglik([0.8], EXP, base, "fc") != loglik([0.8], EXP, ex, "fc")


@given(seed=st.integers(0, 10_000))
def test_fixed_rule_invariant_to_permuting_earlier_points(seed):
    rng = np.random.default_rng(seed)
    s = S.run_fixed(rng, D.GevParams(0, 1, 0.2), 3.5, historical=S.make_historical(D.GevParams(0, 1, 0.2), 5))
    perm = np.append(rng.permutation(s.n - 1), s.n - 1)
    t = S.StoppedSample(s.historical, s.obs[perm], s.thresholds, s.rule)
    theta = [0.1, 1.1, 0.15]
    for kind in ALL_KINDS:
        assert loglik(theta, GEV, t, kind) == pytest.approx(loglik(theta, GEV, s, kind), rel=1e-12)


def test_std_equals_fixed_n_plus_penalty():
    h = S.make_historical(D.GevParams(0, 1, 0.2), 10)
    s = S.run_fixed(np.random.default_rng(0), D.GevParams(0, 1, 0.2), 4.0, historical=h)
    theta = [0.2, 1.3, 0.1]
    assert loglik(theta, GEV, s, "std") == pytest.approx(
        loglik_fixed_n(theta, GEV, s.obs) + historical_penalty(theta, GEV, h), rel=1e-12)
    assert loglik(theta, GEV, s, "std") == pytest.approx(
        loglik_fixed_n(theta, GEV, np.concatenate([h.values, s.obs])), rel=1e-12)


def test_variable_thresholds_enter_fc():
    obs = np.array([0.5, 1.0, 4.0])
    thr = np.array([2.0, 3.0, 3.5])
    s = S.StoppedSample(S.HistoricalData.empty(), obs, thr, S.StoppingRule.variable(20.0))
    beta = 0.7
    std = loglik([beta], EXP, s, "std")
    want = std + beta * 3.5 - math.log1p(-math.exp(-beta * 2.0)) - math.log1p(-math.exp(-beta * 3.0))
    assert loglik([beta], EXP, s, "fc") == pytest.approx(want, rel=1e-12)
    assert loglik([beta], EXP, s, "trunc") == pytest.approx(
        math.log(beta) * 3 - beta * (0.5 + 1.0 + 3.5), rel=1e-12)


def test_gpd_kinds_match_scipy():
    p = D.GpdParams.matching_gev(0.2, 10.0)
    c = float(D.gpd_return_level(20.0, p))
    s = S.run_gpd_fixed(np.random.default_rng(12), p, c)
    model = ModelSpec.gpd(p.v)
    theta = [p.sigma_v * 1.1, 0.15]
    ref = stats.genpareto(c=theta[1], scale=theta[0])
    y = s.values - p.v
    lp = ref.logpdf(y)
    final = s.final_year_mask
    hist = np.arange(y.size) < s.n0
    pre = (~hist) & (np.arange(y.size) < s.trigger)
    std = lp.sum()
    assert loglik(theta, model, s, "std") == pytest.approx(std, rel=1e-10)
    assert loglik(theta, model, s, "ex") == pytest.approx(lp[~final].sum(), rel=1e-10)
    pc = std - ref.logsf(c - p.v)
    assert loglik(theta, model, s, "pc") == pytest.approx(pc, rel=1e-10)
    assert loglik(theta, model, s, "fc") == pytest.approx(pc - pre.sum() * ref.logcdf(c - p.v), rel=1e-10)
    lt = lp.copy()
    lt[s.trigger] = ref.logpdf(c - p.v)
    assert loglik(theta, model, s, "trunc") == pytest.approx(lt.sum(), rel=1e-10)


def test_gamma_likelihood_matches_scipy():
    s = S.run_fixed(np.random.default_rng(2), D.GammaParams(2.5, 1.0), 6.0,
                    historical=S.make_historical(D.GammaParams(2.5, 1.0), 10))
    ref = stats.gamma(2.5, scale=1 / 1.3)
    std = ref.logpdf(s.historical.values).sum() + ref.logpdf(s.obs).sum()
    model = ModelSpec.gamma(2.5)
    assert loglik([1.3], model, s, "std") == pytest.approx(std, rel=1e-10)
    fc = std - ref.logsf(6.0) - (s.n - 1) * ref.logcdf(6.0)
    assert loglik([1.3], model, s, "fc") == pytest.approx(fc, rel=1e-9)


def test_trend_model_location_shift():
    model = ModelSpec.gev_trend(t0=2000.0)
    years = np.arange(1990.0, 2011.0)
    x = 0.03 * (years - 2000) + np.linspace(-1, 2, years.size)
    ll = loglik_fixed_n([0.0, 0.03, 1.0, 0.1], model, x, t=years)
    want = stats.genextreme(c=-0.1, scale=1.0).logpdf(x - 0.03 * (years - 2000)).sum()
    assert ll == pytest.approx(want, rel=1e-11)


def test_model_spec_masks():
    assert ModelSpec.gev().n_free == 3
    assert ModelSpec.gev_idealized().n_free == 1
    assert list(ModelSpec.gev_idealized().free_idx) == [2]
    assert ModelSpec.gpd(1.0).n_params == 2
    with pytest.raises(ValueError):
        ModelSpec("weibull")
    with pytest.raises(ValueError):
        ModelSpec("gev", {"kappa": 1.0})
