"""Cumulative adoption curves: smoothing-spline fit, growth and critical times."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.interpolate import PPoly
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

__all__ = [
    "CumulativeCurve",
    "CurveSummary",
    "DegenerateCurveError",
    "SmoothingSpline",
    "SecantFit",
    "TrajectoryAnalyzer",
    "default_lambda_grid",
    "fit_spline",
    "max_slope",
    "critical_points",
    "summarize",
]

DELTA_SENSITIVITY = (0.005, 0.01, 0.02)


class DegenerateCurveError(ValueError):
    """Too few support minutes to fit a smoothing spline."""


@dataclass(frozen=True)
class CumulativeCurve:
    minutes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.minutes, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if m.ndim != 1 or m.shape != c.shape or len(m) == 0:
            raise ValueError("minutes and counts must be equal-length 1-d arrays")
        if np.any(np.diff(m) <= 0):
            raise ValueError("minutes must be strictly increasing")
        if np.any(np.diff(c) < 0):
            raise ValueError("cumulative counts must be nondecreasing")
        object.__setattr__(self, "minutes", m)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_increments(cls, minutes, increments) -> "CumulativeCurve":
        return cls(np.asarray(minutes), np.cumsum(np.asarray(increments, dtype=float)))

    @classmethod
    def from_frames(cls, frames: pd.DataFrame) -> "CumulativeCurve":
        return cls.from_increments(frames["minute"].to_numpy(), frames["y"].to_numpy())

    @property
    def final_size(self) -> float:
        return float(self.counts[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.counts, prepend=0.0)

    @property
    def support(self) -> int:
        """Minutes in which at least one new tweet arrived."""
        return int(np.count_nonzero(self.increments > 0))


# -- smoothing spline ---------------------------------------------------------


def default_lambda_grid(h: float = 1.0) -> np.ndarray:
    """Quarter-decade grid ``h**3 * 10**[-3, 9]`` for knot spacing ``h``."""
    return (h**3) * 10.0 ** np.arange(-3.0, 9.0001, 0.25)


class _Reinsch:
    """Banded pieces of the Reinsch form: ``Q`` (n x n-2) and ``R`` (n-2 x n-2)."""

    def __init__(self, x: np.ndarray):
        h = np.diff(x)
        self.n = len(x)
        self.r0 = (h[:-1] + h[1:]) / 3.0
        self.r1 = h[1:-1] / 6.0
        self.qa = 1.0 / h[:-1]
        self.qb = -(1.0 / h[:-1] + 1.0 / h[1:])
        self.qc = 1.0 / h[1:]
        # bands of Q^T Q
        self.b0 = self.qa**2 + self.qb**2 + self.qc**2
        self.b1 = self.qb[:-1] * self.qa[1:] + self.qc[:-1] * self.qb[1:]
        self.b2 = self.qc[:-2] * self.qa[2:]

    def qt(self, y):
        return self.qa * y[:-2] + self.qb * y[1:-1] + self.qc * y[2:]

    def q(self, g):
        out = np.zeros(self.n)
        out[:-2] += self.qa * g
        out[1:-1] += self.qb * g
        out[2:] += self.qc * g
        return out

    def solve(self, y: np.ndarray, lam: float, trace: bool = False):
        """Return fitted values, interior second derivatives and tr(hat matrix)."""
        m = self.n - 2
        ab = np.zeros((3, m))
        ab[0] = self.r0 + lam * self.b0
        ab[1, : m - 1] = self.r1 + lam * self.b1
        ab[2, : m - 2] = lam * self.b2
        cb = cholesky_banded(ab, lower=True)
        gam = cho_solve_banded((cb, True), self.qt(y))
        g = y - lam * self.q(gam)
        tr = None
        if trace:
            tr = self.n - lam * self._trace_minv_b(cb)
        return g, gam, tr

    def _trace_minv_b(self, cb: np.ndarray) -> float:
        # Takahashi recursion: the band of M^{-1} from M = L D L^T
        m = self.n - 2
        dg = cb[0]
        d = (dg * dg).tolist()
        l1 = (cb[1] / dg).tolist() + [0.0, 0.0]
        l2 = (cb[2] / dg).tolist() + [0.0, 0.0]
        s0 = [0.0] * (m + 2)
        s1 = [0.0] * (m + 2)
        s2 = [0.0] * (m + 2)
        for i in range(m - 1, -1, -1):
            a1 = l1[i]
            a2 = l2[i]
            s12 = s1[i + 1]
            s2[i] = -a1 * s12 - a2 * s0[i + 2]
            s1[i] = -a1 * s0[i + 1] - a2 * s12
            s0[i] = 1.0 / d[i] - a1 * s1[i] - a2 * s2[i]
        s0 = np.asarray(s0[:m])
        s1 = np.asarray(s1[: m - 1])
        s2 = np.asarray(s2[: m - 2])
        return float(s0 @ self.b0 + 2.0 * (s1 @ self.b1) + 2.0 * (s2 @ self.b2))


class SmoothingSpline(RegressorMixin, BaseEstimator):
    """Natural cubic smoothing spline with GCV-selected penalty.

    Minimizes ``sum (y_i - f(x_i))**2 + lam * integral f''(x)**2 dx``.

    Parameters
    ----------
    lam : float, optional
        Fixed penalty. ``None`` selects it from ``lam_grid`` by generalized
        cross-validation.
    lam_grid : array-like, optional
        Candidate penalties; defaults to :func:`default_lambda_grid` scaled by
        the median knot spacing.
    criterion : {"increments", "levels"}, default="increments"
        Where the GCV residuals are measured. ``"increments"`` scores the
        first differences of data and fit, which suits cumulative counts
        whose noise is a random walk; ``"levels"`` is textbook GCV.

    Attributes
    ----------
    lam_ : float
    gcv_scores_ : ndarray or None
    ppoly_ : scipy.interpolate.PPoly
    fitted_ : ndarray
    edf_ : float
        Trace of the hat matrix at ``lam_``.
    """

    def __init__(self, lam: Optional[float] = None, lam_grid=None, criterion: str = "increments"):
        self.lam = lam
        self.lam_grid = lam_grid
        self.criterion = criterion

    def _score(self, y, g, tr):
        n = len(y)
        if self.criterion == "increments":
            r = np.diff(y - g, prepend=0.0)
        elif self.criterion == "levels":
            r = y - g
        else:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        denom = (n - tr) ** 2
        if denom <= 0:
            return np.inf
        return n * float(r @ r) / denom

    def fit(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if len(x) < 3:
            raise DegenerateCurveError("a smoothing spline needs at least 3 knots")
        if np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        rs = _Reinsch(x)
        if self.lam is not None:
            lam = float(self.lam)
            g, gam, tr = rs.solve(y, lam, trace=True)
            self.gcv_scores_ = None
        else:
            grid = self.lam_grid
            if grid is None:
                grid = default_lambda_grid(float(np.median(np.diff(x))))
            grid = np.asarray(grid, dtype=float)
            scores = np.empty(len(grid))
            best = None
            for i, lam_i in enumerate(grid):
                g_i, gam_i, tr_i = rs.solve(y, lam_i, trace=True)
                scores[i] = self._score(y, g_i, tr_i)
                if np.isfinite(scores[i]) and (best is None or scores[i] < scores[best[0]]):
                    best = (i, g_i, gam_i, tr_i)
            if best is None:
                i = len(grid) - 1
                g_i, gam_i, tr_i = rs.solve(y, grid[i], trace=True)
                best = (i, g_i, gam_i, tr_i)
            i, g, gam, tr = best
            lam = float(grid[i])
            self.gcv_scores_ = scores
            self.lam_grid_ = grid
        self.lam_ = lam
        self.edf_ = float(tr)
        self.knots_ = x
        self.fitted_ = g
        self.second_derivs_ = np.concatenate([[0.0], gam, [0.0]])
        self.ppoly_ = self._ppoly(x, g, self.second_derivs_)
        return self

    @staticmethod
    def _ppoly(x, g, gam) -> PPoly:
        h = np.diff(x)
        c3 = (gam[1:] - gam[:-1]) / (6.0 * h)
        c2 = gam[:-1] / 2.0
        c1 = np.diff(g) / h - h * (2.0 * gam[:-1] + gam[1:]) / 6.0
        c0 = g[:-1]
        return PPoly(np.vstack([c3, c2, c1, c0]), x, extrapolate=True)

    def predict(self, x):
        check_is_fitted(self, "ppoly_")
        return self.ppoly_(np.asarray(x, dtype=float))

    def derivative(self, x, nu: int = 1):
        check_is_fitted(self, "ppoly_")
        return self.ppoly_.derivative(nu)(np.asarray(x, dtype=float))


class SecantFit:
    """Piecewise-linear stand-in for curves too sparse to smooth.

    The slope attached to minute ``t`` is the count added in that minute
    (counts before the first grid minute are zero).
    """

    def __init__(self, minutes, counts):
        self.knots_ = np.asarray(minutes, dtype=float)
        self.fitted_ = np.asarray(counts, dtype=float)
        self.lam_ = float("nan")

    def predict(self, x):
        return np.interp(np.asarray(x, dtype=float), self.knots_, self.fitted_)

    def derivative(self, x, nu: int = 1):
        if nu != 1:
            raise ValueError("SecantFit only provides first derivatives")
        slopes = np.diff(self.fitted_, prepend=0.0)
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.knots_, x, side="left"), 0, len(self.knots_) - 1)
        return slopes[idx]


# -- curve characterization -----------------------------------------------------


def fit_spline(curve: CumulativeCurve, min_support: int = 4, **kwargs) -> SmoothingSpline:
    """GCV smoothing spline through a cumulative curve.

    Raises
    ------
    DegenerateCurveError
        When fewer than ``min_support`` minutes carry new tweets.
    """
    if curve.support < min_support or len(curve.minutes) < 3:
        raise DegenerateCurveError(
            f"curve has {curve.support} support minutes; at least {min_support} are needed"
        )
    return SmoothingSpline(**kwargs).fit(curve.minutes, curve.counts)


def max_slope(fit) -> tuple:
    """Largest clamped first derivative over the knot grid.

    Returns ``(growth, t_m)``.  For a spline the grid winner is refined by a
    bounded scalar search over the two adjacent knot intervals.
    """
    x = fit.knots_
    d = np.maximum(fit.derivative(x), 0.0)
    i = int(np.argmax(d))
    best, t_m = float(d[i]), float(x[i])
    if best <= 0.0:
        return 0.0, float(x[0])
    if isinstance(fit, SmoothingSpline):
        lo = x[max(i - 1, 0)]
        hi = x[min(i + 1, len(x) - 1)]
        if hi > lo:
            res = minimize_scalar(
                lambda t: -float(fit.derivative(t)),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-6},
            )
            if res.success and -res.fun > best:
                best, t_m = float(-res.fun), float(res.x)
    return best, t_m


def _first_at_least(counts: np.ndarray, level: float) -> int:
    return int(np.argmax(counts >= level - 1e-9 * max(1.0, abs(level))))


def critical_points(fit, curve: CumulativeCurve, delta: float = 0.01, saturation: float = 0.99, slope=None) -> tuple:
    """Onset, turning point and saturation minute ``(t0, t_star, t_e)``.

    The turning point is the first whole minute at or after the max-slope
    location where the tangent line runs more than ``delta * final_size``
    above the fitted curve; it is clamped into ``[t0, t_e]``.
    """
    minutes, counts = curve.minutes, curve.counts
    F = curve.final_size
    if F <= 0:
        t = int(minutes[0])
        return t, t, t
    t0 = int(minutes[int(np.argmax(counts > 0))])
    t_e = int(minutes[_first_at_least(counts, saturation * F)])
    growth, t_m = max_slope(fit) if slope is None else slope
    grid = minutes[minutes >= math.ceil(t_m - 1e-9)]
    t_star = t_e
    if len(grid):
        fitted = fit.predict(grid)
        tangent = float(fit.predict(t_m)) + growth * (grid - t_m)
        over = np.nonzero(tangent - fitted > delta * F)[0]
        if len(over):
            t_star = int(grid[over[0]])
    t_star = min(max(t_star, t0), t_e)
    return t0, t_star, t_e


@dataclass
class CurveSummary:
    t0: int
    t_star: int
    t_e: int
    growth: float
    persistence: int
    final_size: float
    t_m: float = float("nan")
    method: str = "spline"
    lam: float = float("nan")
    t_star_sensitivity: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.t0 <= self.t_star <= self.t_e):
            raise ValueError("critical points must satisfy t0 <= t_star <= t_e")

    def as_row(self) -> dict:
        return {
            "total": self.final_size,
            "growth_tpm": self.growth,
            "persistence_min": self.persistence,
            "t0": self.t0,
            "t_star": self.t_star,
            "t_e": self.t_e,
        }


class TrajectoryAnalyzer(BaseEstimator):
    """Fit a cumulative curve and extract growth, persistence and critical times.

    Parameters
    ----------
    delta : float, default=0.01
        Tangent deviation (fraction of final size) marking the turning point.
    saturation : float, default=0.99
        Fraction of final size defining the saturated time.
    min_support : int, default=4
        Curves with fewer tweet-bearing minutes use secant slopes.
    lam, lam_grid, criterion
        Forwarded to :class:`SmoothingSpline`.
    """

    def __init__(
        self,
        delta: float = 0.01,
        saturation: float = 0.99,
        min_support: int = 4,
        lam: Optional[float] = None,
        lam_grid=None,
        criterion: str = "increments",
    ):
        self.delta = delta
        self.saturation = saturation
        self.min_support = min_support
        self.lam = lam
        self.lam_grid = lam_grid
        self.criterion = criterion

    def fit(self, minutes, counts=None):
        curve = minutes if isinstance(minutes, CumulativeCurve) else CumulativeCurve(minutes, counts)
        try:
            spline = fit_spline(
                curve, self.min_support, lam=self.lam, lam_grid=self.lam_grid, criterion=self.criterion
            )
            method = "spline"
        except DegenerateCurveError:
            spline = SecantFit(curve.minutes, curve.counts)
            method = "secant"
        growth, t_m = max_slope(spline)
        t0, t_star, t_e = critical_points(spline, curve, self.delta, self.saturation, slope=(growth, t_m))
        sens = {
            d: critical_points(spline, curve, d, self.saturation, slope=(growth, t_m))[1]
            for d in DELTA_SENSITIVITY
        }
        self.curve_ = curve
        self.spline_ = spline
        self.summary_ = CurveSummary(
            t0=t0,
            t_star=t_star,
            t_e=t_e,
            growth=growth,
            persistence=t_e - t0,
            final_size=curve.final_size,
            t_m=t_m,
            method=method,
            lam=float(spline.lam_),
            t_star_sensitivity=sens,
        )
        return self

    def plot_frame(self) -> pd.DataFrame:
        """Observed, fitted and tangent values on the minute grid."""
        check_is_fitted(self, "summary_")
        s = self.summary_
        x = self.curve_.minutes
        fitted = self.spline_.predict(x)
        fit_tm = float(self.spline_.predict(s.t_m))
        return pd.DataFrame(
            {
                "minute": x.astype(np.int64),
                "observed": self.curve_.counts,
                "fitted": fitted,
                "tangent": fit_tm + s.growth * (x - s.t_m),
            }
        )


def summarize(episode, frames: pd.DataFrame, **params) -> CurveSummary:
    """Curve summary for one hashtag episode from its vibrancy frames."""
    if episode is not None and len(episode) == 0:
        raise ValueError("episode has no events")
    curve = CumulativeCurve.from_frames(frames)
    return TrajectoryAnalyzer(**params).fit(curve).summary_
