"""Persistence analysis: Cox proportional hazards and Kaplan-Meier curves.

Duration is ``t_e - t_star`` in minutes.  Ties are handled with Efron's
approximation.  Counting-process rows ``(start, stop]`` allow covariates that
change every minute; risk sets are ``start < t <= stop``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .vibrancy import aggregate_at

log = logging.getLogger(__name__)

__all__ = [
    "FIXED_COVARIATES",
    "ENV_COVARIATES",
    "SurvivalRecord",
    "build_records",
    "counting_rows",
    "CoxFit",
    "CoxPH",
    "ConvergenceWarning",
    "hazard_effect",
    "KMCurve",
    "KaplanMeier",
    "median_survival",
]

FIXED_COVARIATES = ["rt_alpha", "rp_alpha", "src_alpha", "follow_alpha"]
ENV_COVARIATES = ["rtEnv", "rpEnv", "srcEnv_alpha"]


class ConvergenceWarning(UserWarning):
    pass


# -- records ----------------------------------------------------------------------


@dataclass
class SurvivalRecord:
    tag: str
    duration: float
    event: bool
    covariates: dict = field(default_factory=dict)
    t_star: int = 0


def build_records(
    frames: pd.DataFrame,
    summaries: Mapping,
    assignments: Mapping,
    cls: str,
    final_sizes: Optional[Mapping] = None,
) -> list:
    """One record per hashtag of class ``cls``.

    Covariates are the aggregate vibrancy at ``t_star``.  A hashtag is censored
    at the end of its window when ``final_sizes`` gives it a final size that the
    observed cumulative count never reaches 99% of; otherwise the death time
    is ``t_e``.
    """
    by_tag = {tag: df for tag, df in frames.groupby("tag", sort=True)}
    out = []
    for tag in sorted(t for t, c in assignments.items() if c == cls):
        s = summaries[tag]
        fr = by_tag[tag]
        agg = aggregate_at(fr, s.t_star).as_dict()
        event = True
        duration = float(s.t_e - s.t_star)
        if final_sizes is not None and tag in final_sizes:
            observed = float(fr["y"].sum())
            if observed < 0.99 * float(final_sizes[tag]):
                event = False
                duration = float(fr["minute"].iloc[-1] - s.t_star)
        out.append(SurvivalRecord(tag=tag, duration=duration, event=event, covariates=agg, t_star=int(s.t_star)))
    return out


def records_frame(records: Sequence[SurvivalRecord]) -> pd.DataFrame:
    rows = [{"tag": r.tag, "duration": r.duration, "event": int(r.event), **r.covariates} for r in records]
    return pd.DataFrame(rows)


def counting_rows(records: Sequence[SurvivalRecord], frames: pd.DataFrame, env: bool = True) -> pd.DataFrame:
    """Expand records into one row per surviving minute.

    The row for minute ``t_star + s`` (``s = 0 .. duration``) is the interval
    ``(s - 1, s]`` and carries the environmental covariates of that minute.
    The first interval starts at -1 so that a death at duration 0 still has
    every subject at risk.
    """
    by_tag = {tag: df.set_index("minute") for tag, df in frames.groupby("tag", sort=True)}
    parts = []
    for r in records:
        d = int(round(r.duration))
        s = np.arange(d + 1)
        part = pd.DataFrame({"tag": r.tag, "start": (s - 1).astype(float), "stop": s.astype(float)})
        part["event"] = 0
        part.loc[part.index[-1], "event"] = int(r.event)
        for k, v in r.covariates.items():
            part[k] = v
        if env:
            fr = by_tag[r.tag]
            mins = r.t_star + s
            for c in ENV_COVARIATES:
                part[c] = fr.loc[mins, c].to_numpy(dtype=float)
        parts.append(part)
    return pd.concat(parts, ignore_index=True)


# -- Cox model --------------------------------------------------------------------


def _efron_terms(X, start, stop, event, beta):
    """Efron partial log-likelihood, score and information."""
    n, p = X.shape
    eta = X @ beta
    w = np.exp(eta)
    wx = w[:, None] * X
    wxx = wx[:, :, None] * X[:, None, :]

    ev = event.astype(bool)
    times, codes = np.unique(stop[ev], return_inverse=True)
    d = np.bincount(codes, minlength=len(times)).astype(float)

    def risk_sum(arr):
        # sum over rows with start < t <= stop, for each event time t
        o_stop = np.argsort(stop, kind="mergesort")
        cum_stop = np.concatenate([np.cumsum(arr[o_stop][::-1], axis=0)[::-1], np.zeros((1,) + arr.shape[1:])])
        i_stop = np.searchsorted(stop[o_stop], times, side="left")
        total = cum_stop[i_stop]
        if start is not None:
            o_start = np.argsort(start, kind="mergesort")
            cum_start = np.concatenate([np.cumsum(arr[o_start][::-1], axis=0)[::-1], np.zeros((1,) + arr.shape[1:])])
            i_start = np.searchsorted(start[o_start], times, side="left")
            total = total - cum_start[i_start]
        return total

    S0, S1, S2 = risk_sum(w), risk_sum(wx), risk_sum(wxx)

    def tie_sum(arr):
        out = np.zeros((len(times),) + arr.shape[1:])
        np.add.at(out, codes, arr[ev])
        return out

    A0, A1, A2 = tie_sum(w), tie_sum(wx), tie_sum(wxx)

    # expand each event time into its d_j Efron steps
    j = np.repeat(np.arange(len(times)), d.astype(int))
    first = np.r_[0, np.cumsum(d)[:-1]].astype(int)
    frac = (np.arange(len(j)) - first[j]) / d[j]
    phi0 = S0[j] - frac * A0[j]
    phi1 = S1[j] - frac[:, None] * A1[j]
    phi2 = S2[j] - frac[:, None, None] * A2[j]

    ll = float(eta[ev].sum() - np.log(phi0).sum())
    mean = phi1 / phi0[:, None]
    score = X[ev].sum(axis=0) - mean.sum(axis=0)
    info = (phi2 / phi0[:, None, None]).sum(axis=0) - np.einsum("ki,kj->ij", mean, mean)
    return ll, score, info


@dataclass
class CoxFit:
    names: list
    coef: np.ndarray
    se: np.ndarray
    loglik: float
    loglik_null: float
    n_subjects: int
    n_events: int
    converged: bool
    monotone: bool
    score_norm: float
    iterations: int
    dropped: list = field(default_factory=list)

    @property
    def hazard_ratios(self) -> np.ndarray:
        return np.exp(self.coef)

    @property
    def pvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return 2.0 * stats.norm.sf(np.abs(self.coef / self.se))

    @property
    def aic(self) -> float:
        return float(2 * len(self.coef) - 2 * self.loglik)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"coef": self.coef, "exp_coef": self.hazard_ratios, "se": self.se, "p": self.pvalues},
            index=pd.Index(self.names, name="variable"),
        )

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])


class CoxPH(BaseEstimator):
    """Cox proportional-hazards model with Efron ties and optional entry times.

    Parameters
    ----------
    max_iter : int, default=100
    tol : float, default=1e-10
        Convergence threshold on the relative change in log partial likelihood.
    monotone_limit : float, default=20.0
        Flag monotone likelihood when a coefficient times its covariate's
        standard deviation exceeds this value.
    """

    def __init__(self, max_iter: int = 100, tol: float = 1e-10, monotone_limit: float = 20.0):
        self.max_iter = max_iter
        self.tol = tol
        self.monotone_limit = monotone_limit

    def fit(self, X, durations, events, entry=None, ids=None, feature_names: Optional[Sequence[str]] = None):
        """Fit by Newton-Raphson with step halving.

        Parameters
        ----------
        X : array-like of shape (n_rows, p)
        durations : array-like
            Event or censoring time (``stop`` for counting-process rows).
        events : array-like of bool
        entry : array-like, optional
            Row start times; rows are at risk on ``(entry, durations]``.
        ids : array-like, optional
            Subject labels, used only to count subjects.
        """
        X = check_array(X, ensure_min_features=0, ensure_all_finite=True)
        stop = np.asarray(durations, dtype=float)
        event = np.asarray(events).astype(bool)
        start = None if entry is None else np.asarray(entry, dtype=float)
        if len(stop) != X.shape[0] or len(event) != X.shape[0]:
            raise ValueError("X, durations and events must have the same length")
        if np.any(stop < 0) and start is None:
            raise ValueError("durations must be nonnegative")
        if start is not None and np.any(start >= stop):
            raise ValueError("every row needs entry < duration")
        if event.sum() < 2:
            raise ValueError(f"Cox model needs at least 2 events, got {int(event.sum())}")
        names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]

        sd = X.std(axis=0) if X.shape[0] else np.zeros(X.shape[1])
        keep = sd > 0
        dropped = [n for n, k in zip(names, keep) if not k]
        if dropped:
            warnings.warn(f"dropping constant covariates: {dropped}", stacklevel=2)
        names = [n for n, k in zip(names, keep) if k]
        Xk = X[:, keep]
        mu = Xk.mean(axis=0)
        scale = sd[keep]
        Z = (Xk - mu) / scale

        p = Z.shape[1]
        b = np.zeros(p)
        ll, score, info = _efron_terms(Z, start, stop, event, b)
        ll_null = ll
        info0 = np.diag(info).copy()
        converged = p == 0
        it = 0
        for it in range(1, self.max_iter + 1):
            if p == 0:
                break
            try:
                step = np.linalg.solve(info, score)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(info, score, rcond=None)[0]
            halvings = 0
            while True:
                b_new = b + step
                ll_new, score_new, info_new = _efron_terms(Z, start, stop, event, b_new)
                if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                    break
                step = step / 2
                halvings += 1
                if halvings > 30:
                    break
            delta = ll_new - ll
            b, ll, score, info = b_new, ll_new, score_new, info_new
            if abs(delta) <= self.tol * max(abs(ll), 1.0) and np.max(np.abs(step)) < 1e-8:
                converged = True
                break

        # a diverging coefficient shows up as a huge estimate or a vanishing information
        monotone = bool(p and (np.any(np.abs(b) > self.monotone_limit) or np.any(np.diag(info) < 1e-8 * info0)))
        if monotone:
            warnings.warn("monotone likelihood: a coefficient diverges", ConvergenceWarning, stacklevel=2)
        if not converged:
            warnings.warn(f"Cox fit did not converge in {self.max_iter} iterations", ConvergenceWarning, stacklevel=2)

        coef = b / scale if p else b
        try:
            cov_z = np.linalg.inv(info) if p else np.zeros((0, 0))
            # a singular or indefinite information matrix leaves NaN SEs
            with np.errstate(invalid="ignore"):
                se = np.sqrt(np.diag(cov_z)) / scale if p else np.zeros(0)
        except np.linalg.LinAlgError:
            se = np.full(p, np.nan)
        score_orig = score / scale if p else np.zeros(0)

        self.coef_ = coef
        self.se_ = se
        self.feature_names_ = names
        self.loglik_ = ll
        self.result_ = CoxFit(
            names=names,
            coef=coef,
            se=se,
            loglik=float(ll),
            loglik_null=float(ll_null),
            n_subjects=int(len(np.unique(ids))) if ids is not None else int(X.shape[0]),
            n_events=int(event.sum()),
            converged=bool(converged),
            monotone=monotone,
            score_norm=float(np.max(np.abs(score_orig))) if p else 0.0,
            iterations=it,
            dropped=dropped,
        )
        return self

    def predict_log_hazard(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_


def fit_cox(records: Sequence[SurvivalRecord], frames: Optional[pd.DataFrame] = None, with_env: bool = False, **kwargs) -> CoxFit:
    """Fit the persistence model for one class of records."""
    model = CoxPH(**kwargs)
    if with_env:
        if frames is None:
            raise ValueError("environmental covariates need the frame table")
        rows = counting_rows(records, frames, env=True)
        cols = FIXED_COVARIATES + ENV_COVARIATES
        model.fit(rows[cols].to_numpy(float), rows["stop"], rows["event"], entry=rows["start"], ids=rows["tag"], feature_names=cols)
    else:
        df = records_frame(records)
        model.fit(df[FIXED_COVARIATES].to_numpy(float), df["duration"], df["event"], feature_names=FIXED_COVARIATES)
    return model.result_


def hazard_effect(fit, covariate: str, delta: float = 1.0) -> float:
    """Percent change in hazard for a ``delta`` increase in ``covariate``.

    ``fit`` is a :class:`CoxFit` or a mapping from covariate name to log
    hazard ratio.
    """
    if isinstance(fit, CoxFit):
        if covariate not in fit.names:
            raise KeyError(f"unknown covariate {covariate!r}; fitted: {fit.names}")
        b = fit[covariate]
    else:
        if covariate not in fit:
            raise KeyError(f"unknown covariate {covariate!r}")
        b = float(fit[covariate])
    return float(100.0 * np.expm1(b * delta))


# -- Kaplan-Meier -------------------------------------------------------------------


@dataclass
class KMCurve:
    t: np.ndarray
    survival: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    variance: np.ndarray

    def at(self, t) -> np.ndarray:
        """Step-function value(s) at ``t``."""
        idx = np.searchsorted(self.t, np.asarray(t, dtype=float), side="right") - 1
        return np.where(idx >= 0, self.survival[np.clip(idx, 0, None)], 1.0)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"t": self.t, "S": self.survival, "lower": self.lower, "upper": self.upper, "at_risk": self.at_risk, "events": self.events}
        )


class KaplanMeier(BaseEstimator):
    """Kaplan-Meier survival estimate with a log-transformed Greenwood band.

    Parameters
    ----------
    alpha : float, default=0.05
        Two-sided band level.
    """

    def __init__(self, alpha: float = 0.05):
        self.alpha = alpha

    def fit(self, durations, events=None):
        t = np.asarray(durations, dtype=float)
        e = np.ones(len(t), dtype=bool) if events is None else np.asarray(events).astype(bool)
        if len(t) == 0:
            raise ValueError("Kaplan-Meier needs at least one subject")
        if np.any(t < 0):
            raise ValueError("durations must be nonnegative")
        times = np.unique(t)
        d = np.bincount(np.searchsorted(times, t[e]), minlength=len(times))
        c = np.bincount(np.searchsorted(times, t), minlength=len(times))
        n = len(t) - np.r_[0, np.cumsum(c)[:-1]]
        with np.errstate(divide="ignore", invalid="ignore"):
            S = np.cumprod(1.0 - d / n)
            g = np.cumsum(np.where(n > d, d / (n * (n - d)), np.inf))
        z = stats.norm.ppf(1 - self.alpha / 2)
        with np.errstate(invalid="ignore", over="ignore"):
            width = z * np.sqrt(g)
            lower = np.clip(S * np.exp(-width), 0.0, 1.0)
            upper = np.clip(S * np.exp(width), 0.0, 1.0)
        zero = S <= 0
        lower[zero] = 0.0
        upper[zero] = 0.0
        with np.errstate(invalid="ignore"):
            var = np.where(zero, 0.0, S * S * g)
        if times[0] > 0 or d[0] > 0:
            # anchor row S = 1 at t = 0; deaths at 0 get a second t = 0 row after it
            times, S, lower, upper, var = (np.r_[0.0, times], np.r_[1.0, S], np.r_[1.0, lower], np.r_[1.0, upper], np.r_[0.0, var])
            n, d = np.r_[len(t), n], np.r_[0, d]
        self.curve_ = KMCurve(t=times, survival=S, lower=lower, upper=upper, at_risk=n, events=d, variance=var)
        self.median_ = median_survival(self.curve_)
        return self

    def survival_function_at(self, t):
        check_is_fitted(self, "curve_")
        return self.curve_.at(t)


def median_survival(curve: KMCurve) -> Optional[float]:
    """Smallest time at which the estimate drops to 0.5 or below; None if it never does."""
    hit = np.flatnonzero(curve.survival <= 0.5)
    return float(curve.t[hit[0]]) if len(hit) else None
