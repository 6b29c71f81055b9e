"""Two-class taxonomy of hashtag trajectories.

Hashtags are clustered on z-scored (final size, growth, persistence).  The
cluster with the larger mean final size is labelled ``winner`` and the other
``also_ran``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.cluster import KMeans
from sklearn.utils.validation import check_array, check_is_fitted

log = logging.getLogger(__name__)

__all__ = ["FEATURES", "WINNER", "ALSO_RAN", "TrajectoryClusterer", "ClassAssignment", "label_classes"]

FEATURES = ["final_size", "growth", "persistence"]
WINNER = "winner"
ALSO_RAN = "also_ran"


class TrajectoryClusterer(ClusterMixin, BaseEstimator):
    """k-means on z-scored trajectory features, labelled by final size.

    Parameters
    ----------
    n_init : int, default=50
        k-means++ restarts.
    random_state : int, default=0

    Attributes
    ----------
    labels_ : ndarray of str
        ``winner`` or ``also_ran`` per row.
    centers_ : ndarray of shape (2, 3)
        Centroids in z-score units; row 0 is the winner class.
    degenerate_ : bool
        True when all rows have identical features; every row is then an
        also-ran.
    """

    def __init__(self, n_init: int = 50, random_state: int = 0):
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        if X.shape[1] != len(FEATURES):
            raise ValueError(f"expected {len(FEATURES)} feature columns, got {X.shape[1]}")
        n = X.shape[0]
        if n < 2:
            raise ValueError(f"need at least 2 trajectories to form 2 clusters, got {n}")
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0, ddof=1) if n > 1 else np.ones(X.shape[1])
        distinct = len(np.unique(X, axis=0))
        self.degenerate_ = distinct < 2
        if self.degenerate_:
            warnings.warn("all trajectories are identical; no two-class split exists", stacklevel=2)
            self.labels_ = np.full(n, ALSO_RAN, dtype=object)
            self.centers_ = np.zeros((2, X.shape[1]))
            return self
        scale = np.where(self.scale_ > 0, self.scale_, 1.0)
        self.scale_ = scale
        Z = (X - self.mean_) / scale
        km = KMeans(n_clusters=2, n_init=self.n_init, init="k-means++", random_state=self.random_state)
        raw = km.fit_predict(Z)
        self.inertia_ = float(km.inertia_)
        size_mean = np.array([X[raw == c, 0].mean() for c in (0, 1)])
        growth_mean = np.array([X[raw == c, 1].mean() for c in (0, 1)])
        # larger mean final size wins, growth breaks ties
        win = int(np.lexsort((growth_mean, size_mean))[-1])
        self._winner_cluster = win
        self._kmeans = km
        self.centers_ = km.cluster_centers_[[win, 1 - win]]
        self.labels_ = np.where(raw == win, WINNER, ALSO_RAN).astype(object)
        return self

    def predict(self, X):
        check_is_fitted(self, "labels_")
        X = check_array(X)
        if self.degenerate_:
            return np.full(X.shape[0], ALSO_RAN, dtype=object)
        raw = self._kmeans.predict((X - self.mean_) / self.scale_)
        return np.where(raw == self._winner_cluster, WINNER, ALSO_RAN).astype(object)

    def transform(self, X):
        """Euclidean distances to the (winner, also_ran) centroids in z-score units."""
        check_is_fitted(self, "labels_")
        Z = (check_array(X) - self.mean_) / self.scale_
        return np.linalg.norm(Z[:, None, :] - self.centers_[None, :, :], axis=2)


@dataclass
class ClassAssignment:
    tag: str
    cls: str
    dist_winner: float
    dist_also_ran: float


def label_classes(features: pd.DataFrame, n_init: int = 50, random_state: int = 0) -> tuple:
    """Cluster a per-tag feature table.

    ``features`` must hold a ``tag`` column and the columns in ``FEATURES``.
    Returns ``(assignments, model)`` with assignments sorted by tag.
    """
    features = features.sort_values("tag", kind="mergesort")
    X = features[FEATURES].to_numpy(dtype=float)
    model = TrajectoryClusterer(n_init=n_init, random_state=random_state).fit(X)
    dist = model.transform(X)
    out = [
        ClassAssignment(tag=t, cls=str(c), dist_winner=float(d[0]), dist_also_ran=float(d[1]))
        for t, c, d in zip(features["tag"], model.labels_, dist)
    ]
    return out, model


def assignment_frame(assignments: Sequence[ClassAssignment]) -> pd.DataFrame:
    return pd.DataFrame(
        [(a.tag, a.cls, a.dist_winner, a.dist_also_ran) for a in assignments],
        columns=["tag", "class", "dist_winner", "dist_also_ran"],
    )
