import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import make_smoothing_spline
from scipy.special import expit

from hashtag_lifecycle.trajectory import (
    CumulativeCurve,
    DegenerateCurveError,
    SecantFit,
    SmoothingSpline,
    TrajectoryAnalyzer,
    _Reinsch,
    critical_points,
    default_lambda_grid,
    max_slope,
)


def _noisy(n=80, seed=0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 50, n))
    return x, np.sin(x / 6) * 10 + rng.normal(0, 1, n)


@pytest.mark.parametrize("lam", [1e-2, 1.0, 50.0])
def test_fixed_lambda_matches_scipy(lam):
    x, y = _noisy()
    ours = SmoothingSpline(lam=lam).fit(x, y)
    ref = make_smoothing_spline(x, y, lam=lam)
    grid = np.linspace(x[0], x[-1], 300)
    np.testing.assert_allclose(ours.predict(grid), ref(grid), atol=1e-8)


def test_banded_trace_matches_dense_hat_matrix():
    x, _ = _noisy(40)
    rs = _Reinsch(x)
    lam = 3.0
    hat = np.column_stack([rs.solve(e, lam)[0] for e in np.eye(len(x))])
    assert rs.solve(np.zeros(len(x)), lam, trace=True)[2] == pytest.approx(np.trace(hat), rel=1e-10)


def test_gcv_picks_grid_minimum():
    x, y = _noisy()
    fit = SmoothingSpline(criterion="levels").fit(x, y)
    assert fit.lam_ == fit.lam_grid_[np.nanargmin(fit.gcv_scores_)]
    assert 2 < fit.edf_ < len(x)


def test_default_grid_spans_twelve_decades():
    g = default_lambda_grid(2.0)
    assert g[0] == pytest.approx(8e-3)
    assert g[-1] == pytest.approx(8e9)


def test_spline_input_checks():
    with pytest.raises(DegenerateCurveError):
        SmoothingSpline().fit([0, 1], [0, 1])
    with pytest.raises(ValueError):
        SmoothingSpline().fit([0, 2, 1], [0, 1, 2])
    with pytest.raises(ValueError):
        SmoothingSpline().fit([0, 1, 2], [0, np.nan, 2])
    with pytest.raises(ValueError):
        SmoothingSpline(criterion="bogus").fit(*_noisy())


def test_curve_validation():
    with pytest.raises(ValueError):
        CumulativeCurve([0, 1, 2], [0, 2, 1])
    c = CumulativeCurve.from_increments([0, 1, 2, 3], [1, 0, 2, 0])
    assert c.final_size == 3 and c.support == 2


@pytest.mark.parametrize("L, k", [(1e3, 0.05), (500.0, 0.01)])
def test_exact_logistic_growth_and_saturation(L, k):
    mid = 5 / k
    t = np.arange(math.ceil(mid + 4 * math.log(99) / k) + 1.0)
    s = TrajectoryAnalyzer().fit(t, L * expit(k * (t - mid))).summary_
    assert s.growth == pytest.approx(L * k / 4, rel=1e-4)
    assert s.t_m == pytest.approx(mid, abs=0.5)
    assert abs(s.t_e - (mid + math.log(99) / k)) <= 1
    assert s.t0 <= s.t_star <= s.t_e
    assert s.persistence == s.t_e - s.t0
    assert s.method == "spline"


def test_sparse_curve_uses_secant():
    s = TrajectoryAnalyzer().fit([0, 1, 2, 3, 4], [0, 2, 2, 5, 5]).summary_
    assert s.method == "secant"
    assert s.growth == 3.0
    assert s.t_e == 3


def test_single_tweet_curve():
    s = TrajectoryAnalyzer().fit([5, 6, 7], [1, 1, 1]).summary_
    assert (s.t0, s.t_e, s.persistence, s.final_size) == (5, 5, 0, 1.0)


def test_secant_derivative_is_minute_increment():
    f = SecantFit([0, 1, 2], [1, 4, 4])
    np.testing.assert_array_equal(f.derivative([0, 1, 2]), [1, 3, 0])
    assert max_slope(f) == (3.0, 1.0)


def test_turning_point_moves_later_with_delta():
    t = np.arange(400.0)
    curve = CumulativeCurve(t, 1000 * expit(0.05 * (t - 100)))
    fit = SmoothingSpline().fit(curve.minutes, curve.counts)
    stars = [critical_points(fit, curve, delta=d)[1] for d in (0.005, 0.01, 0.02)]
    assert stars == sorted(stars)


def test_plot_frame_columns():
    a = TrajectoryAnalyzer().fit(np.arange(50.0), np.cumsum(np.arange(50.0)))
    pf = a.plot_frame()
    assert list(pf.columns) == ["minute", "observed", "fitted", "tangent"]
    assert len(pf) == 50


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=5, max_size=60))
def test_summary_invariants(increments):
    increments[0] += 1
    curve = CumulativeCurve.from_increments(np.arange(len(increments)), increments)
    s = TrajectoryAnalyzer().fit(curve).summary_
    assert s.t0 <= s.t_star <= s.t_e
    assert s.growth >= 0
    assert s.final_size == sum(increments)
    assert curve.counts[s.t_e] >= 0.99 * s.final_size - 1e-9
