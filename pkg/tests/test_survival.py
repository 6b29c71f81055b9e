import math
import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hashtag_lifecycle.survival import (
    ConvergenceWarning,
    CoxPH,
    KaplanMeier,
    build_records,
    counting_rows,
    fit_cox,
    hazard_effect,
    median_survival,
    records_frame,
)
from hashtag_lifecycle.synth import gen_survival_cohort
from hashtag_lifecycle.trajectory import CurveSummary

phreg = pytest.importorskip("statsmodels.duration.hazard_regression")
survfunc = pytest.importorskip("statsmodels.duration.survfunc")


def _tied_cohort(n=300, seed=1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    T = np.floor(rng.exponential(30 * np.exp(-X @ [0.5, -0.3, 0.1])))
    C = rng.uniform(0, 80, n)
    return X, np.minimum(T, C).round(), T <= C


def test_efron_fit_matches_oracle():
    X, d, e = _tied_cohort()
    m = CoxPH().fit(X, d, e)
    ref = phreg.PHReg(d, X, status=e.astype(int), ties="efron").fit()
    np.testing.assert_allclose(m.coef_, ref.params, atol=1e-7)
    np.testing.assert_allclose(m.se_, ref.bse, rtol=1e-6)
    assert m.loglik_ == pytest.approx(ref.llf, rel=1e-10)
    assert m.result_.score_norm < 1e-6


def test_counting_process_split_matches_unsplit_and_oracle():
    X, d, e = _tied_cohort(120, seed=4)
    rows = [(i, s - 1.0, float(s), int(e[i] and s == d[i])) for i in range(len(d)) for s in range(int(d[i]) + 1)]
    idx = np.array([r[0] for r in rows])
    start = np.array([r[1] for r in rows])
    stop = np.array([r[2] for r in rows])
    ev = np.array([r[3] for r in rows])
    split = CoxPH().fit(X[idx], stop, ev, entry=start, ids=idx)
    np.testing.assert_allclose(split.coef_, CoxPH().fit(X, d, e).coef_, atol=1e-8)
    # the oracle treats entry as inclusive, so shift entries into the open interval
    ref = phreg.PHReg(stop + 1.0, X[idx], status=ev, entry=start + 1.5, ties="efron").fit()
    np.testing.assert_allclose(split.coef_, ref.params, atol=1e-7)
    assert split.result_.n_subjects == len(d)


def test_cox_requires_two_events():
    with pytest.raises(ValueError):
        CoxPH().fit(np.ones((3, 1)), [1, 2, 3], [1, 0, 0])


def test_constant_covariate_dropped():
    X, d, e = _tied_cohort()
    X = np.column_stack([X, np.ones(len(d))])
    with pytest.warns(UserWarning):
        m = CoxPH().fit(X, d, e, feature_names=["a", "b", "c", "k"])
    assert m.result_.dropped == ["k"]
    assert m.result_.names == ["a", "b", "c"]


def test_monotone_likelihood_flagged():
    x = np.array([[0.0], [0.0], [1.0], [1.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.warns(ConvergenceWarning):
            m = CoxPH().fit(x, [4, 3, 1, 2], [1, 1, 1, 1])
    assert m.result_.monotone


def test_hazard_effect():
    X, d, e = _tied_cohort()
    fit = CoxPH().fit(X, d, e, feature_names=["a", "b", "c"]).result_
    assert hazard_effect(fit, "a") == pytest.approx(100 * (math.exp(fit["a"]) - 1))
    assert hazard_effect({"a": math.log(2)}, "a") == pytest.approx(100.0)
    assert hazard_effect({"a": -0.0065}, "a") == pytest.approx(-0.6479, abs=1e-4)
    with pytest.raises(KeyError):
        hazard_effect(fit, "zzz")


def test_fit_table_and_aic():
    X, d, e = _tied_cohort()
    fit = CoxPH().fit(X, d, e).result_
    assert fit.aic == pytest.approx(2 * 3 - 2 * fit.loglik)
    assert list(fit.table().columns) == ["coef", "exp_coef", "se", "p"]


def test_km_hand_fixture():
    km = KaplanMeier().fit([1, 2, 2, 3, 4, 4, 5], [1, 1, 0, 1, 0, 1, 1])
    c = km.curve_
    np.testing.assert_array_equal(c.t, [0, 1, 2, 3, 4, 5])
    np.testing.assert_allclose(c.survival, [1, 6 / 7, 5 / 7, 15 / 28, 5 / 14, 0], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(c.at_risk, [7, 7, 6, 4, 3, 1])
    assert km.median_ == 4.0
    assert KaplanMeier().fit([1, 2, 3]).curve_.at([1, 2, 3]).tolist() == pytest.approx([2 / 3, 1 / 3, 0])


def test_km_matches_oracle_with_greenwood():
    X, d, e = _tied_cohort()
    km = KaplanMeier().fit(d, e)
    ref = survfunc.SurvfuncRight(d, e.astype(int))
    np.testing.assert_allclose(km.curve_.at(ref.surv_times), ref.surv_prob, atol=1e-12)
    at_events = km.curve_.events > 0
    np.testing.assert_array_equal(km.curve_.t[at_events], ref.surv_times)
    np.testing.assert_allclose(np.sqrt(km.curve_.variance[at_events]), ref.surv_prob_se, rtol=1e-8)
    assert km.median_ == ref.quantile(0.5)


def test_km_censored_tail_has_no_median():
    km = KaplanMeier().fit([1, 2, 3], [1, 0, 0])
    assert median_survival(km.curve_) is None


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.booleans()), min_size=1, max_size=50))
def test_km_properties(data):
    d, e = zip(*data)
    c = KaplanMeier().fit(d, e).curve_
    assert c.t[0] == 0 and c.survival[0] == 1.0
    assert np.all(np.diff(c.survival) <= 0)
    assert np.all((c.lower <= c.survival + 1e-12) & (c.survival <= c.upper + 1e-12))
    assert np.all((c.lower >= 0) & (c.upper <= 1))


def _toy_frames():
    rows = []
    for tag, n in (("a", 30), ("b", 30), ("c", 30)):
        for m in range(n):
            rows.append(
                {"tag": tag, "minute": m, "y": 1, "rt": m % 3, "rp": m % 2, "src_alpha": m // 2, "follow_alpha": 50.0 + m,
                 "rtEnv": 5, "rpEnv": 2, "srcEnv_alpha": m}
            )
    return pd.DataFrame(rows)


def _sum(t_star, t_e):
    return CurveSummary(t0=0, t_star=t_star, t_e=t_e, growth=1.0, persistence=t_e, final_size=30.0, t_m=1.0, method="spline", lam=1.0)


def test_records_and_counting_rows():
    frames = _toy_frames()
    summ = {"a": _sum(5, 12), "b": _sum(4, 4), "c": _sum(3, 20)}
    recs = build_records(frames, summ, {"a": "w", "b": "w", "c": "x"}, "w", final_sizes={"a": 1000})
    assert [r.tag for r in recs] == ["a", "b"]
    assert not recs[0].event and recs[0].duration == 29 - 5
    assert recs[1].event and recs[1].duration == 0
    assert recs[1].covariates["rt_alpha"] == float(sum(m % 3 for m in range(5)))
    rows = counting_rows(recs, frames)
    b = rows[rows.tag == "b"]
    assert list(b[["start", "stop", "event"]].itertuples(index=False, name=None)) == [(-1.0, 0.0, 1)]
    a = rows[rows.tag == "a"]
    assert len(a) == 25 and a["event"].sum() == 0
    np.testing.assert_array_equal(a["srcEnv_alpha"], np.arange(5, 30))
    assert list(records_frame(recs).columns[:3]) == ["tag", "duration", "event"]


def test_fit_cox_on_records():
    recs, truth = gen_survival_cohort([0.4, -0.2, 0.1, 0.0], rate=0.05, n=400, seed=5,
                                      names=["rt_alpha", "rp_alpha", "src_alpha", "follow_alpha"])
    fit = fit_cox(recs)
    assert fit.names == ["rt_alpha", "rp_alpha", "src_alpha", "follow_alpha"]
    np.testing.assert_allclose(fit.coef, truth.params["beta"], atol=0.2)
