"""Per-minute conversational-vibrancy features and environmental covariates.

Minute ``m`` of an episode covers ``[event_start + 60 m, event_start + 60 (m + 1))``.
Frames run from the onset minute of the hashtag to the last minute of the
tracking window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .episodes import HashtagEpisode
from .events import EventStream

__all__ = [
    "VIBRANCY_COLUMNS",
    "ENV_COLUMNS",
    "AggregateVibrancy",
    "expected_audience",
    "frame_series",
    "env_series",
    "aggregate_at",
    "VibrancyExtractor",
]

VIBRANCY_COLUMNS = ["minute", "y", "rt", "rp", "src_alpha", "follow_alpha"]
ENV_COLUMNS = ["minute", "rtEnv", "rpEnv", "srcEnv_alpha"]


def _top_count(n: int, quantile: float) -> int:
    # nearest-rank size of the upper tail; rounding guards 0.1 * n float error
    return max(1, math.ceil(round((1.0 - quantile) * n, 9)))


def expected_audience(
    users: Union[Mapping, Iterable], quantile: float = 0.9
) -> float:
    """Mean follower count of the users in the top ``1 - quantile`` fraction.

    Parameters
    ----------
    users : mapping user_id -> follower_count, or iterable of pairs
    quantile : float, default=0.9
        The top ``ceil((1 - quantile) * n)`` users by follower count are
        averaged; equal counts at the cut are ordered by user_id.

    Raises
    ------
    ValueError
        If ``users`` is empty.
    """
    pairs = list(users.items()) if isinstance(users, Mapping) else list(users)
    if not pairs:
        raise ValueError("expected_audience needs at least one user")
    if not 0.0 <= quantile < 1.0:
        raise ValueError("quantile must lie in [0, 1)")
    m = _top_count(len(pairs), quantile)
    ranked = sorted(pairs, key=lambda p: (-p[1], str(p[0])))
    return float(np.mean([c for _, c in ranked[:m]]))


def _top_mean(values: np.ndarray, quantile: float) -> float:
    n = len(values)
    m = _top_count(n, quantile)
    if m >= n:
        return float(values.mean())
    return float(np.partition(values, n - m)[n - m :].mean())


def _minute_of(ts: np.ndarray, event_start: float) -> np.ndarray:
    return np.floor((ts - event_start) / 60.0).astype(np.int64)


def _episode_minutes(episode: HashtagEpisode) -> tuple:
    n_total = int(math.ceil((episode.tracking_end - episode.event_start) / 60.0))
    return episode.onset_minute, n_total


def frame_series(episode: HashtagEpisode, stream: EventStream = None, quantile: float = 0.9) -> pd.DataFrame:
    """Vibrancy frames for one hashtag.

    Columns: ``minute, y, rt, rp, src_alpha, follow_alpha``.  ``y``, ``rt`` and
    ``rp`` are counts within the minute; ``src_alpha`` counts distinct retweeted
    originals and ``follow_alpha`` is :func:`expected_audience` over every
    user who used the tag, both through the end of the minute.
    """
    stream = episode.stream if stream is None else stream
    m0, n_total = _episode_minutes(episode)
    width = n_total - m0
    pos = episode.indices
    minutes = _minute_of(stream.timestamps[pos], episode.event_start) - m0
    rt_mask = stream.is_retweet[pos]
    rp_mask = stream.is_reply[pos]

    y = np.bincount(minutes, minlength=width)[:width]
    rt = np.bincount(minutes[rt_mask], minlength=width)[:width]
    rp = np.bincount(minutes[rp_mask], minlength=width)[:width]

    first_seen: dict = {}
    follow = np.zeros(width)
    latest: dict = {}
    current = 0.0
    events = stream.events
    j = 0
    n = len(pos)
    for mi in range(width):
        changed = False
        while j < n and minutes[j] == mi:
            e = events[pos[j]]
            if e.retweet_of is not None and e.retweet_of not in first_seen:
                first_seen[e.retweet_of] = mi
            latest[e.user_id] = e.follower_count
            changed = True
            j += 1
        if changed:
            current = _top_mean(np.fromiter(latest.values(), dtype=float, count=len(latest)), quantile)
        follow[mi] = current
    src_new = np.bincount(np.fromiter(first_seen.values(), dtype=np.int64, count=len(first_seen)), minlength=width)[:width]

    return pd.DataFrame(
        {
            "minute": np.arange(m0, n_total, dtype=np.int64),
            "y": y.astype(np.int64),
            "rt": rt.astype(np.int64),
            "rp": rp.astype(np.int64),
            "src_alpha": np.cumsum(src_new).astype(np.int64),
            "follow_alpha": follow,
        },
        columns=VIBRANCY_COLUMNS,
    )


def _window_totals(stream: EventStream, event_start: float, tracking_end: float) -> dict:
    key = ("window", event_start, tracking_end)
    hit = stream.cache.get(key)
    if hit is not None:
        return hit
    sl = stream.window(event_start, tracking_end)
    idx = np.arange(sl.start, sl.stop)
    n_total = int(math.ceil((tracking_end - event_start) / 60.0))
    minutes = _minute_of(stream.timestamps[idx], event_start)
    rt_mask = stream.is_retweet[idx]
    rp_mask = stream.is_reply[idx]
    rt_idx = idx[rt_mask]
    sources = [stream.events[i].retweet_of for i in rt_idx]
    _, codes = np.unique(np.asarray(sources, dtype=object).astype(str), return_inverse=True) if sources else (None, np.empty(0, np.int64))
    out = {
        "n_total": n_total,
        "rt_total": np.bincount(minutes[rt_mask], minlength=n_total)[:n_total],
        "rp_total": np.bincount(minutes[rp_mask], minlength=n_total)[:n_total],
        "rt_pos": rt_idx,
        "rt_minute": minutes[rt_mask],
        "rt_source": np.asarray(codes, dtype=np.int64),
    }
    stream.cache[key] = out
    return out


def env_series(episode: HashtagEpisode, stream: EventStream = None, frames: pd.DataFrame = None) -> pd.DataFrame:
    """Environmental covariates: activity in tracked tweets lacking the tag.

    Columns: ``minute, rtEnv, rpEnv, srcEnv_alpha``.  ``srcEnv_alpha``
    accumulates distinct retweeted originals from the onset minute onwards.
    Pass the tag's ``frames`` to skip recomputing its own counts.
    """
    stream = episode.stream if stream is None else stream
    m0, n_total = _episode_minutes(episode)
    width = n_total - m0
    tot = _window_totals(stream, episode.event_start, episode.tracking_end)
    if frames is None:
        frames = frame_series(episode, stream)
    rt_env = tot["rt_total"][m0:n_total] - frames["rt"].to_numpy()
    rp_env = tot["rp_total"][m0:n_total] - frames["rp"].to_numpy()

    keep = (tot["rt_minute"] >= m0) & ~np.isin(tot["rt_pos"], episode.indices)
    mins = tot["rt_minute"][keep]
    src = tot["rt_source"][keep]
    # rt_minute is nondecreasing, so the first index per source is its first minute
    _, first = np.unique(src, return_index=True)
    src_new = np.bincount(mins[first] - m0, minlength=width)[:width]

    return pd.DataFrame(
        {
            "minute": np.arange(m0, n_total, dtype=np.int64),
            "rtEnv": rt_env.astype(np.int64),
            "rpEnv": rp_env.astype(np.int64),
            "srcEnv_alpha": np.cumsum(src_new).astype(np.int64),
        },
        columns=ENV_COLUMNS,
    )


@dataclass(frozen=True)
class AggregateVibrancy:
    rt_alpha: float
    rp_alpha: float
    src_alpha: float
    follow_alpha: float

    def as_dict(self) -> dict:
        return {
            "rt_alpha": self.rt_alpha,
            "rp_alpha": self.rp_alpha,
            "src_alpha": self.src_alpha,
            "follow_alpha": self.follow_alpha,
        }


def aggregate_at(frames: pd.DataFrame, cut: int) -> AggregateVibrancy:
    """Totals of ``rt``/``rp`` and levels of ``src_alpha``/``follow_alpha`` at minute ``cut``."""
    minutes = frames["minute"].to_numpy()
    if len(minutes) == 0 or cut < minutes[0] or cut > minutes[-1]:
        raise ValueError(f"cut minute {cut} outside frame range")
    upto = minutes <= cut
    row = frames.loc[frames["minute"] == cut].iloc[0]
    return AggregateVibrancy(
        rt_alpha=float(frames["rt"].to_numpy()[upto].sum()),
        rp_alpha=float(frames["rp"].to_numpy()[upto].sum()),
        src_alpha=float(row["src_alpha"]),
        follow_alpha=float(row["follow_alpha"]),
    )


class VibrancyExtractor(TransformerMixin, BaseEstimator):
    """Turn a list of episodes into one long frame table.

    Parameters
    ----------
    with_env : bool, default=True
        Append the environmental columns.
    quantile : float, default=0.9
        Cut used for the expected-audience feature.
    """

    def __init__(self, with_env: bool = True, quantile: float = 0.9):
        self.with_env = with_env
        self.quantile = quantile

    def fit(self, episodes=None, y=None):
        return self

    def transform(self, episodes: Sequence[HashtagEpisode]) -> pd.DataFrame:
        parts = []
        for ep in episodes:
            fr = frame_series(ep, quantile=self.quantile)
            if self.with_env:
                env = env_series(ep, frames=fr)
                fr = pd.concat([fr, env.drop(columns="minute")], axis=1)
            fr.insert(0, "tag", ep.tag)
            fr.insert(0, "episode_id", ep.episode_id)
            parts.append(fr)
        if not parts:
            cols = ["episode_id", "tag"] + VIBRANCY_COLUMNS + (ENV_COLUMNS[1:] if self.with_env else [])
            return pd.DataFrame(columns=cols)
        return pd.concat(parts, ignore_index=True)
