import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import lfilter

from hashtag_lifecycle.growth import (
    ArmaErrorRegression,
    DesignError,
    _full_loglik,
    _Stacked,
    ar_to_pacf,
    build_design,
    diagnostics,
    fit_armax,
    is_invertible,
    is_stationary,
    pacf_to_ar,
    pooled_acf,
)
from hashtag_lifecycle.synth import gen_armax_series
from hashtag_lifecycle.trajectory import CurveSummary

sarimax = pytest.importorskip("statsmodels.tsa.statespace.sarimax")


def _arma_data(n=400, seed=0, groups=1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    e = lfilter([1, 0.4], [1, -0.5, 0.2], rng.normal(size=n))
    y = 1.0 + X @ [0.7, -0.3] + e
    return X, y, np.repeat(np.arange(groups), n // groups)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=4))
def test_pacf_reparametrization_roundtrip(r):
    phi = pacf_to_ar(np.array(r))
    assert is_stationary(phi)
    np.testing.assert_allclose(ar_to_pacf(phi), r, atol=1e-8)


def test_stationarity_checks():
    assert is_stationary([0.5, -0.2])
    assert not is_stationary([1.1])
    assert is_invertible([0.3])
    assert not is_invertible([-1.5])


@pytest.mark.parametrize("groups", [1, 8])
def test_loglik_matches_state_space_oracle(groups):
    X, y, g = _arma_data(groups=groups)
    Xc = np.column_stack([np.ones(len(y)), X])
    beta, ar, ma, s2 = np.array([0.9, 0.6, -0.2]), np.array([0.4, -0.1]), np.array([0.3]), 1.3
    ours = _full_loglik(_Stacked(y, Xc, g), beta, ar, ma, s2)
    params = np.r_[beta, ar, ma, s2]
    ref = sum(
        sarimax.SARIMAX(y[g == s], exog=Xc[g == s], order=(2, 0, 1)).loglike(params) for s in np.unique(g)
    )
    assert ours == pytest.approx(ref, rel=1e-9)


def test_fit_reaches_oracle_optimum():
    X, y, _ = _arma_data(n=600, seed=3)
    m = ArmaErrorRegression().fit(X, y)
    Xc = np.column_stack([np.ones(len(y)), X])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = sarimax.SARIMAX(y, exog=Xc, order=(2, 0, 1)).fit(disp=0, maxiter=500)
    assert m.loglik_ >= res.llf - 1e-4
    np.testing.assert_allclose(m.coef_, res.params[1:3], atol=2e-3)
    assert m.result_.aic == pytest.approx(2 * 7 - 2 * m.loglik_)


def test_fitted_attributes_and_table():
    X, y, g = _arma_data(groups=4)
    m = ArmaErrorRegression(order=(1, 1)).fit(X, y, groups=g, feature_names=["a", "b"])
    r = m.result_
    assert r.names == ["const", "a", "b", "ar1", "ma1", "sigma2"]
    assert np.all(np.isfinite(r.bse))
    assert r["a"] == m.coef_[0]
    assert list(r.table().columns) == ["coef", "se", "z", "p"]
    assert m.predict(X[:3]).shape == (3,)
    assert r.loglik >= r.loglik_start


def test_too_few_observations():
    X, y, _ = _arma_data(n=60)
    with pytest.raises(DesignError):
        ArmaErrorRegression().fit(X, y)


def test_recovers_planted_coefficients():
    design, truth = gen_armax_series([0.3, 0.15, 0.001, 0.1], seed=11)
    fit = fit_armax(design)
    for name, v in zip(design.columns, truth.params["beta"]):
        i = fit.names.index(name)
        assert abs(fit.params[i] - v) < 4 * fit.bse[i]


def test_diagnostics_white_innovations():
    design, _ = gen_armax_series([0.3, 0.15, 0.001, 0.1], segments=50, seed=2)
    m = ArmaErrorRegression().fit(design.X, design.y, groups=design.groups)
    rep = diagnostics(m, design)
    assert rep.n == design.n_obs
    assert rep.ljung_box_df == 7
    assert rep.ljung_box_p > 0.001
    assert rep.acf_outside <= 4
    assert list(rep.frame().columns) == ["lag", "acf", "pacf", "band"]


def test_pooled_acf_single_segment_matches_oracle():
    tsa = pytest.importorskip("statsmodels.tsa.stattools")
    x = np.random.default_rng(5).normal(size=300)
    np.testing.assert_allclose(pooled_acf(x, np.zeros(300), 10), tsa.acf(x, nlags=10, fft=False)[1:], atol=1e-12)


def test_pooled_acf_ignores_cross_segment_pairs():
    x = np.r_[np.ones(5), -np.ones(5)]
    acf = pooled_acf(x, np.repeat([0, 1], 5), 1)
    assert acf[0] == pytest.approx(8 / 10)


def _summary(t0, t_star):
    return CurveSummary(t0=t0, t_star=t_star, t_e=t_star + 5, growth=1.0, persistence=t_star + 5 - t0, final_size=10.0, t_m=t0 + 1, method="spline", lam=1.0)


def test_build_design_lags_and_exclusions():
    rows = []
    for tag in ("a", "b"):
        for m in range(12):
            rows.append({"tag": tag, "minute": m, "y": m, "rt": m, "rp": 0, "src_alpha": 2 * m, "follow_alpha": 10.0})
    frames = pd.DataFrame(rows)
    d = build_design(frames, {"a": _summary(0, 8), "b": _summary(0, 3)}, {"a": "winner", "b": "winner"}, "winner")
    assert d.excluded.keys() == {"b"}
    assert d.n_obs == 8
    np.testing.assert_array_equal(d.minutes, np.arange(1, 9))
    np.testing.assert_allclose(d.y, np.log1p(np.arange(1, 9)))
    # predictors come from the previous minute; src_alpha is not logged
    np.testing.assert_allclose(d.X[:, 0], np.log1p(np.arange(0, 8)))
    np.testing.assert_allclose(d.X[:, 2], 2 * np.arange(0, 8))
    with pytest.raises(DesignError):
        build_design(frames, {"a": _summary(0, 8)}, {"a": "winner"}, "also_ran")
