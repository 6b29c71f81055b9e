"""Growth model: regression of per-minute adoption on lagged vibrancy with ARMA errors.

The likelihood is the exact Gaussian likelihood of

    y_t = b0 + b' x_{t-1} + e_t,
    e_t = phi_1 e_{t-1} + ... + phi_p e_{t-p} + v_t + psi_1 v_{t-1} + ... + psi_q v_{t-q},

evaluated with a Kalman filter that restarts from the stationary
distribution at every segment (hashtag) boundary.  Segments share all
parameters.  The regression coefficients and innovation variance are
profiled out, so the numerical optimizer only sees the ARMA parameters,
which are mapped through partial autocorrelations to stay inside the
stationary / invertible region.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from scipy.linalg import solve_discrete_lyapunov
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

log = logging.getLogger(__name__)

__all__ = [
    "BASE_PREDICTORS",
    "ENV_PREDICTORS",
    "RegressionDesign",
    "DesignError",
    "ArmaxConvergenceError",
    "ArmaxFit",
    "ArmaErrorRegression",
    "ResidualReport",
    "build_design",
    "fit_armax",
    "diagnostics",
    "pacf_to_ar",
    "ar_to_pacf",
]

BASE_PREDICTORS = ["rt", "rp", "src_alpha", "follow_alpha"]
ENV_PREDICTORS = ["rtEnv", "rpEnv", "srcEnv_alpha"]
_LOGGED = {"rt", "rp", "follow_alpha", "rtEnv", "rpEnv"}


class DesignError(ValueError):
    pass


class ArmaxConvergenceError(RuntimeError):
    """The optimizer stopped short of a stationary point.

    ``best`` holds the best iterate as ``(ar, ma)`` arrays.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# -- design ---------------------------------------------------------------------


@dataclass
class RegressionDesign:
    """Stacked per-hashtag segments.

    ``y`` and ``X`` are row-aligned; ``groups`` labels the segment of each row
    and rows of one segment are contiguous and minute-ordered.
    """

    y: np.ndarray
    X: np.ndarray
    columns: list
    groups: np.ndarray
    minutes: Optional[np.ndarray] = None
    excluded: dict = field(default_factory=dict)

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def segment_lengths(self) -> np.ndarray:
        return _segment_lengths(self.groups)

    def frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.X, columns=self.columns)
        df.insert(0, "y", self.y)
        df.insert(0, "minute", self.minutes if self.minutes is not None else np.arange(self.n_obs))
        df.insert(0, "segment", self.groups)
        return df


def _segment_lengths(groups) -> np.ndarray:
    groups = np.asarray(groups)
    if len(groups) == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.ones(len(groups), dtype=bool)
    change[1:] = groups[1:] != groups[:-1]
    starts = np.flatnonzero(change)
    return np.diff(np.append(starts, len(groups)))


def _transform_column(name: str, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.log1p(values) if name in _LOGGED else values


def build_design(
    frames: pd.DataFrame,
    summaries: Mapping,
    assignments: Mapping,
    cls: str,
    with_env: bool = False,
    min_length: int = 5,
) -> RegressionDesign:
    """Assemble the growth-model design for one class.

    Parameters
    ----------
    frames : DataFrame
        Long frame table with a ``tag`` column (see ``VibrancyExtractor``).
    summaries : mapping tag -> CurveSummary
    assignments : mapping tag -> class label
    cls : str
        Class to keep, e.g. ``"winner"``.
    with_env : bool
        Add the three environmental predictors.
    min_length : int, default=5
        Hashtags with ``t_star - t0 < min_length`` are excluded.

    Rows cover minutes ``t0 + 1 .. t_star``; the response is
    ``log1p(y_t)`` and predictors are read at ``t - 1``.
    """
    cols = BASE_PREDICTORS + (ENV_PREDICTORS if with_env else [])
    ys, Xs, gs, ms = [], [], [], []
    excluded = {}
    by_tag = {tag: df for tag, df in frames.groupby("tag", sort=True)}
    for tag in sorted(t for t, c in assignments.items() if c == cls):
        s = summaries[tag]
        if s.t_star - s.t0 < min_length:
            excluded[tag] = f"segment length {s.t_star - s.t0} < {min_length}"
            log.info("growth design: excluding %s (%s)", tag, excluded[tag])
            continue
        fr = by_tag[tag].set_index("minute")
        resp_min = np.arange(s.t0 + 1, s.t_star + 1)
        pred_min = resp_min - 1
        ys.append(np.log1p(fr.loc[resp_min, "y"].to_numpy(dtype=float)))
        Xs.append(np.column_stack([_transform_column(c, fr.loc[pred_min, c].to_numpy()) for c in cols]))
        gs.append(np.full(len(resp_min), tag, dtype=object))
        ms.append(resp_min)
    if not ys:
        raise DesignError(f"class {cls!r} has no usable segments")
    return RegressionDesign(
        y=np.concatenate(ys),
        X=np.vstack(Xs),
        columns=list(cols),
        groups=np.concatenate(gs),
        minutes=np.concatenate(ms),
        excluded=excluded,
    )


# -- ARMA parameter maps -------------------------------------------------------------


def pacf_to_ar(r: np.ndarray) -> np.ndarray:
    """Durbin-Levinson map from partial autocorrelations in (-1, 1) to AR coefficients."""
    r = np.asarray(r, dtype=float)
    phi = np.zeros(0)
    for k, rk in enumerate(r):
        phi = np.append(phi - rk * phi[::-1], rk)
    return phi


def ar_to_pacf(phi: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pacf_to_ar` (requires a stationary AR polynomial)."""
    phi = np.asarray(phi, dtype=float).copy()
    p = len(phi)
    r = np.zeros(p)
    for k in range(p - 1, -1, -1):
        rk = phi[k]
        if abs(rk) >= 1:
            raise ValueError("AR polynomial is not stationary")
        r[k] = rk
        phi = (phi[:k] + rk * phi[:k][::-1]) / (1.0 - rk * rk)
    return r


def _unpack(u: np.ndarray, p: int, q: int) -> tuple:
    ar = pacf_to_ar(np.tanh(u[:p]))
    ma = -pacf_to_ar(np.tanh(u[p : p + q]))
    return ar, ma


def _pack(ar, ma) -> np.ndarray:
    return np.concatenate([np.arctanh(ar_to_pacf(ar)), np.arctanh(ar_to_pacf(-np.asarray(ma, dtype=float)))])


def is_stationary(ar) -> bool:
    """True when every partial autocorrelation of the step-down recursion lies in (-1, 1)."""
    ar = np.asarray(ar, dtype=float)
    if len(ar) == 0:
        return True
    try:
        return bool(np.all(np.abs(ar_to_pacf(ar)) < 1.0))
    except (ValueError, FloatingPointError):
        return False


def is_invertible(ma) -> bool:
    return is_stationary(-np.asarray(ma, dtype=float))


# -- Kalman filter on stacked segments ---------------------------------------------------


def _gains(ar, ma, maxlen: int):
    """Innovation variances F_t and gains K_t for unit innovation variance.

    They depend only on the time index within a segment, so one pass serves
    every segment.
    """
    p, q = len(ar), len(ma)
    r = max(p, q + 1)
    T = np.zeros((r, r))
    T[:p, 0] = ar
    T[np.arange(r - 1), np.arange(1, r)] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    R[1 : q + 1] = ma
    RR = np.outer(R, R)
    P = solve_discrete_lyapunov(T, RR)
    F = np.empty(maxlen)
    K = np.empty((maxlen, r))
    settled = False
    for t in range(maxlen):
        if settled:
            F[t] = F[t - 1]
            K[t] = K[t - 1]
            continue
        f = P[0, 0]
        k = T @ P[:, 0] / f
        F[t] = f
        K[t] = k
        P_next = T @ P @ T.T + RR - f * np.outer(k, k)
        settled = t > 0 and abs(f - 1.0) < 1e-14 and np.allclose(P_next, P, rtol=0, atol=1e-15)
        P = P_next
    return T, F, K


class _Stacked:
    """Segments padded into a (n_seg, maxlen, 1 + k) block."""

    def __init__(self, y, X, groups):
        lengths = _segment_lengths(groups)
        self.lengths = lengths
        self.maxlen = int(lengths.max())
        n_seg = len(lengths)
        k = X.shape[1]
        E = np.zeros((n_seg, self.maxlen, 1 + k))
        mask = np.zeros((n_seg, self.maxlen), dtype=bool)
        start = 0
        for s, L in enumerate(lengths):
            E[s, :L, 0] = y[start : start + L]
            E[s, :L, 1:] = X[start : start + L]
            mask[s, :L] = True
            start += L
        self.E = E
        self.mask = mask
        self.count_t = mask.sum(axis=0)
        self.n = int(lengths.sum())

    def innovations(self, ar, ma):
        T, F, K = _gains(ar, ma, self.maxlen)
        E = self.E
        n_seg, maxlen, ncol = E.shape
        a = np.zeros((n_seg, T.shape[0], ncol))
        V = np.empty_like(E)
        for t in range(maxlen):
            v = E[:, t, :] - a[:, 0, :]
            V[:, t, :] = v
            a = np.matmul(T, a) + K[t][None, :, None] * v[:, None, :]
        return V, F

    def rows(self, V):
        """Masked innovations in original row order."""
        return V[self.mask]


def _profile(stk: _Stacked, ar, ma):
    V, F = stk.innovations(ar, ma)
    sqf = np.sqrt(F)
    W = (V / sqf[None, :, None])[stk.mask]
    wy, WX = W[:, 0], W[:, 1:]
    beta, *_ = np.linalg.lstsq(WX, wy, rcond=None)
    resid = wy - WX @ beta
    n = stk.n
    sigma2 = float(resid @ resid) / n
    logdet = float(stk.count_t @ np.log(F))
    ll = -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0) - 0.5 * logdet
    return ll, beta, sigma2


def _full_loglik(stk: _Stacked, beta, ar, ma, sigma2) -> float:
    if sigma2 <= 0 or not (is_stationary(ar) and is_invertible(ma)):
        return -np.inf
    V, F = stk.innovations(ar, ma)
    v = V[..., 0] - V[..., 1:] @ beta
    Fm = np.broadcast_to(F, v.shape)[stk.mask]
    v = v[stk.mask]
    return float(-0.5 * np.sum(np.log(2 * np.pi * sigma2 * Fm) + v * v / (sigma2 * Fm)))


def _numerical_hessian(f, x: np.ndarray) -> np.ndarray:
    # central differences; step ~ eps**(1/4) scaled by |x|
    k = len(x)
    h = np.finfo(float).eps ** 0.25 * np.maximum(np.abs(x), 0.1)
    H = np.empty((k, k))
    f0 = f(x)
    ee = np.diag(h)
    for i in range(k):
        fp = f(x + 2 * ee[i])
        fm = f(x - 2 * ee[i])
        H[i, i] = (fp - 2 * f0 + fm) / (4 * h[i] * h[i])
        for j in range(i + 1, k):
            val = (
                f(x + ee[i] + ee[j]) - f(x + ee[i] - ee[j]) - f(x - ee[i] + ee[j]) + f(x - ee[i] - ee[j])
            ) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


# -- results -----------------------------------------------------------------------


@dataclass
class ArmaxFit:
    names: list
    params: np.ndarray
    bse: np.ndarray
    loglik: float
    loglik_start: float
    aic: float
    n_obs: int
    n_segments: int
    sigma2: float
    ar: np.ndarray
    ma: np.ndarray
    converged: bool = True
    se_flag: Optional[str] = None
    se_kind: str = "observed information"

    @property
    def zvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.params / self.bse

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.zvalues))

    @property
    def n_params(self) -> int:
        return len(self.params)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"coef": self.params, "se": self.bse, "z": self.zvalues, "p": self.pvalues},
            index=pd.Index(self.names, name="variable"),
        )

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.names.index(name)])


class ArmaErrorRegression(RegressorMixin, BaseEstimator):
    """Linear regression whose errors follow a stationary ARMA(p, q) process.

    Parameters
    ----------
    order : tuple of int, default=(2, 1)
        AR and MA orders of the error process.
    fit_intercept : bool, default=True
    maxiter : int, default=200
        Iteration cap for the quasi-Newton search.
    gtol : float, default=1e-7
        Gradient tolerance on the per-observation profile log-likelihood.

    Attributes
    ----------
    coef_, intercept_, ar_params_, ma_params_, sigma2_ : fitted parameters
    result_ : ArmaxFit
        Full parameter vector with observed-information standard errors.
    """

    def __init__(self, order=(2, 1), fit_intercept: bool = True, maxiter: int = 200, gtol: float = 1e-7):
        self.order = order
        self.fit_intercept = fit_intercept
        self.maxiter = maxiter
        self.gtol = gtol

    def fit(self, X, y, groups=None, feature_names: Optional[Sequence[str]] = None):
        X = check_array(X, ensure_min_samples=1, ensure_all_finite=True)
        y = np.asarray(y, dtype=float).ravel()
        if groups is None:
            groups = np.zeros(len(y), dtype=np.int64)
        groups = np.asarray(groups)
        check_consistent_length(X, y, groups)
        p, q = (int(v) for v in self.order)
        names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
        if self.fit_intercept:
            X = np.column_stack([np.ones(len(y)), X])
            names = ["const"] + names
        n_free = X.shape[1] + p + q + 1
        if len(y) <= 10 * n_free:
            raise DesignError(f"{len(y)} observations are too few for {n_free} free parameters (need > {10 * n_free})")

        stk = _Stacked(y, X, groups)

        def objective(u):
            ar, ma = _unpack(u, p, q)
            return -_profile(stk, ar, ma)[0] / stk.n

        u0 = np.zeros(p + q)
        ll_start = _profile(stk, np.zeros(p), np.zeros(q))[0]
        converged = True
        if p + q > 0:
            res = minimize(objective, u0, method="BFGS", options={"maxiter": self.maxiter, "gtol": self.gtol})
            u_hat = res.x
            if not res.success:
                gmax = float(np.max(np.abs(res.jac))) if res.jac is not None else np.inf
                if res.nit >= self.maxiter or gmax > 1e-4:
                    ar, ma = _unpack(u_hat, p, q)
                    raise ArmaxConvergenceError(
                        f"quasi-Newton search did not converge: {res.message} (|grad| = {gmax:.2e})",
                        best=(ar, ma),
                    )
            if objective(u_hat) > objective(u0):
                u_hat = u0
        else:
            u_hat = u0
        ar, ma = _unpack(u_hat, p, q)
        ll, beta, sigma2 = _profile(stk, ar, ma)

        theta = np.concatenate([beta, ar, ma, [sigma2]])
        k = len(beta)

        def full(th):
            return _full_loglik(stk, th[:k], th[k : k + p], th[k + p : k + p + q], th[-1])

        H = _numerical_hessian(full, theta)
        se_flag = None
        try:
            cov = np.linalg.inv(-H)
            bse = np.sqrt(np.diag(cov))
            if not np.all(np.isfinite(bse)) or np.any(np.diag(cov) <= 0):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            cov = np.full_like(H, np.nan)
            bse = np.full(len(theta), np.nan)
            se_flag = "singular information matrix"
            log.warning("ARMA-error regression: %s; standard errors unavailable", se_flag)

        all_names = names + [f"ar{i + 1}" for i in range(p)] + [f"ma{i + 1}" for i in range(q)] + ["sigma2"]
        self._stacked = stk
        self.cov_params_ = cov
        self.result_ = ArmaxFit(
            names=all_names,
            params=theta,
            bse=bse,
            loglik=float(ll),
            loglik_start=float(ll_start),
            aic=float(2 * len(theta) - 2 * ll),
            n_obs=stk.n,
            n_segments=len(stk.lengths),
            sigma2=float(sigma2),
            ar=ar,
            ma=ma,
            converged=converged,
            se_flag=se_flag,
        )
        if self.fit_intercept:
            self.intercept_ = float(beta[0])
            self.coef_ = beta[1:]
        else:
            self.intercept_ = 0.0
            self.coef_ = beta
        self.ar_params_ = ar
        self.ma_params_ = ma
        self.sigma2_ = float(sigma2)
        self.loglik_ = float(ll)
        self.aic_ = self.result_.aic
        self.n_features_in_ = X.shape[1] - int(self.fit_intercept)
        return self

    def predict(self, X):
        """Regression mean ``intercept_ + X @ coef_`` (no error forecast)."""
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return self.intercept_ + X @ self.coef_

    def standardized_innovations(self) -> np.ndarray:
        """One-step-ahead innovations divided by their standard deviation, in row order."""
        check_is_fitted(self, "coef_")
        stk = self._stacked
        beta = np.r_[self.intercept_, self.coef_] if self.fit_intercept else self.coef_
        V, F = stk.innovations(self.ar_params_, self.ma_params_)
        v = V[..., 0] - V[..., 1:] @ beta
        z = v / np.sqrt(self.sigma2_ * F)[None, :]
        return z[stk.mask]


def fit_armax(design: RegressionDesign, order=(2, 1), **kwargs) -> ArmaxFit:
    model = ArmaErrorRegression(order=order, **kwargs)
    model.fit(design.X, design.y, groups=design.groups, feature_names=design.columns)
    return model.result_


# -- residual diagnostics -----------------------------------------------------------------


@dataclass
class ResidualReport:
    acf: np.ndarray
    pacf: np.ndarray
    band: float
    ljung_box: float
    ljung_box_df: int
    ljung_box_p: float
    n: int

    @property
    def acf_outside(self) -> int:
        return int(np.sum(np.abs(self.acf) > self.band))

    @property
    def pacf_outside(self) -> int:
        return int(np.sum(np.abs(self.pacf) > self.band))

    def frame(self) -> pd.DataFrame:
        lags = np.arange(1, len(self.acf) + 1)
        return pd.DataFrame({"lag": lags, "acf": self.acf, "pacf": self.pacf, "band": self.band})


def pooled_acf(resid: np.ndarray, groups, nlags: int = 20) -> np.ndarray:
    """Autocorrelations that only pair residuals from the same segment."""
    resid = np.asarray(resid, dtype=float)
    e = resid - resid.mean()
    denom = float(e @ e)
    lengths = _segment_lengths(groups)
    starts = np.r_[0, np.cumsum(lengths)[:-1]]
    acf = np.zeros(nlags)
    for k in range(1, nlags + 1):
        tot = 0.0
        for s, L in zip(starts, lengths):
            if L > k:
                seg = e[s : s + L]
                tot += float(seg[k:] @ seg[:-k])
        acf[k - 1] = tot / denom
    return acf


def _pacf_from_acf(acf: np.ndarray) -> np.ndarray:
    # Durbin-Levinson on the autocorrelation sequence
    r = np.r_[1.0, acf]
    nlags = len(acf)
    pacf = np.zeros(nlags)
    phi = np.zeros(0)
    for k in range(1, nlags + 1):
        num = r[k] - (phi @ r[1:k][::-1] if k > 1 else 0.0)
        den = 1.0 - (phi @ r[1:k] if k > 1 else 0.0)
        a = num / den
        phi = np.append(phi - a * phi[::-1], a)
        pacf[k - 1] = a
    return pacf


def diagnostics(model: ArmaErrorRegression, design: Optional[RegressionDesign] = None, nlags: int = 20, lb_lag: int = 10) -> ResidualReport:
    """ACF/PACF of standardized innovations and a Ljung-Box test."""
    z = model.standardized_innovations()
    if len(z) == 0:
        raise ValueError("no residuals to diagnose")
    groups = design.groups if design is not None else np.zeros(len(z))
    n = len(z)
    acf = pooled_acf(z, groups, nlags)
    pacf = _pacf_from_acf(acf)
    h = min(lb_lag, nlags)
    Q = n * (n + 2) * float(np.sum(acf[:h] ** 2 / (n - np.arange(1, h + 1))))
    p, q = (int(v) for v in model.order)
    df = max(h - p - q, 1)
    return ResidualReport(
        acf=acf,
        pacf=pacf,
        band=2.0 / np.sqrt(n),
        ljung_box=Q,
        ljung_box_df=df,
        ljung_box_p=float(stats.chi2.sf(Q, df)),
        n=n,
    )
