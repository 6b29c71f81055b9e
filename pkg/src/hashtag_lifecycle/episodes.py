"""Novel / popular / relevant hashtag detection around exogenous shock events."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .events import EventStream, _parse_timestamp

__all__ = [
    "EpisodeConfig",
    "HashtagEpisode",
    "CoverageError",
    "EpisodeError",
    "find_novel",
    "filter_pop",
    "filter_relevant",
    "build_episode",
    "user_count",
    "HashtagDetector",
    "detect_all",
]

DEFAULT_KEYWORDS = ("debate", "president")


class CoverageError(ValueError):
    """The stream does not cover the interval a rule needs to inspect."""


class EpisodeError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeConfig:
    """Windowing rules for one shock event.

    ``peak_duration`` is in minutes, ``lookback`` and ``tracking`` in hours.
    """

    episode_id: str
    event_start: float
    peak_duration: float = 120
    lookback: float = 96
    tracking: float = 77
    min_users: int = 100
    keywords: tuple = DEFAULT_KEYWORDS

    def __post_init__(self):
        if self.peak_duration <= 0:
            raise ValueError("peak_duration must be positive")
        if self.lookback <= 0:
            raise ValueError("lookback must be positive")
        if self.tracking < self.peak_duration / 60:
            raise ValueError("tracking window must contain the peak window")
        if self.min_users < 1:
            raise ValueError("min_users must be at least 1")
        object.__setattr__(self, "keywords", tuple(k.lower() for k in self.keywords))

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeConfig":
        d = dict(d)
        d["episode_id"] = str(d["episode_id"])
        d["event_start"] = _parse_timestamp(d["event_start"], 0)
        if "keywords" in d:
            d["keywords"] = tuple(d["keywords"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "event_start": self.event_start,
            "peak_duration": self.peak_duration,
            "lookback": self.lookback,
            "tracking": self.tracking,
            "min_users": self.min_users,
            "keywords": list(self.keywords),
        }

    @property
    def peak_end(self) -> float:
        return self.event_start + 60.0 * self.peak_duration

    @property
    def lookback_start(self) -> float:
        return self.event_start - 3600.0 * self.lookback

    @property
    def tracking_end(self) -> float:
        return self.event_start + 3600.0 * self.tracking

    @property
    def n_minutes(self) -> int:
        """Number of whole minutes in the tracking window."""
        return int(np.ceil(60.0 * self.tracking))


@dataclass(frozen=True)
class HashtagEpisode:
    tag: str
    episode_id: str
    t0: float
    indices: np.ndarray = field(repr=False)
    stream: EventStream = field(repr=False, compare=False)
    event_start: float = 0.0
    tracking_end: float = 0.0

    @property
    def events(self) -> tuple:
        return tuple(self.stream.events[i] for i in self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def onset_minute(self) -> int:
        return int(np.floor((self.t0 - self.event_start) / 60.0))


def _check_coverage(stream: EventStream, config: EpisodeConfig, slack: float) -> None:
    lo, _ = stream.span
    if lo is None or lo > config.lookback_start + slack:
        raise CoverageError(
            f"episode {config.episode_id}: stream starts at {lo}, after the lookback "
            f"start {config.lookback_start} (slack {slack} s)"
        )


def find_novel(stream: EventStream, config: EpisodeConfig, slack: float = 60.0) -> set:
    """Tags first seen inside the peak window and absent from the lookback.

    ``slack`` (seconds) tolerates a stream whose first record falls just after
    the nominal lookback start.
    """
    _check_coverage(stream, config, slack)
    ts = stream.timestamps
    novel = set()
    for tag, pos in stream.tag_index.items():
        first = ts[pos[0]]
        if config.event_start <= first < config.peak_end:
            # first occurrence in the peak window implies none earlier in the stream
            novel.add(tag)
    return novel


def _tracked_positions(stream: EventStream, config: EpisodeConfig, tag: str) -> np.ndarray:
    pos = stream.tag_index.get(tag)
    if pos is None:
        return np.empty(0, dtype=np.int64)
    ts = stream.timestamps[pos]
    keep = (ts >= config.event_start) & (ts < config.tracking_end)
    return pos[keep]


def user_count(stream: EventStream, config: EpisodeConfig, tag: str) -> int:
    """Distinct users mentioning ``tag`` in the tracking window."""
    return len({stream.events[i].user_id for i in _tracked_positions(stream, config, tag)})


def filter_pop(stream: EventStream, config: EpisodeConfig, novel: Iterable[str]) -> set:
    return {t for t in novel if user_count(stream, config, t) >= config.min_users}


def filter_relevant(
    stream: EventStream,
    pop: Iterable[str],
    keywords: Sequence[str],
    config: Optional[EpisodeConfig] = None,
) -> set:
    """Keep tags with at least one keyword-bearing tweet (or a keyword in the tag).

    Matching is a case-insensitive substring test. With ``config`` given only
    tweets inside its tracking window are inspected.
    """
    pop = set(pop)
    kws = [k.lower() for k in keywords if k]
    if not kws:
        warnings.warn("empty keyword list; relevance filter keeps every tag", stacklevel=2)
        return pop
    kept = set()
    for tag in pop:
        if any(k in tag for k in kws):
            kept.add(tag)
            continue
        if config is None:
            pos = stream.tag_index.get(tag, ())
        else:
            pos = _tracked_positions(stream, config, tag)
        for i in pos:
            text = stream.events[i].text.lower()
            if any(k in text for k in kws):
                kept.add(tag)
                break
    return kept


def build_episode(stream: EventStream, config: EpisodeConfig, tag: str) -> HashtagEpisode:
    pos = _tracked_positions(stream, config, tag)
    if len(pos) == 0:
        raise EpisodeError(f"tag {tag!r} has no events in the tracking window of {config.episode_id}")
    t0 = float(stream.timestamps[pos[0]])
    if not (config.event_start <= t0 < config.peak_end):
        raise EpisodeError(f"tag {tag!r} onset {t0} lies outside the peak window")
    return HashtagEpisode(
        tag=tag,
        episode_id=config.episode_id,
        t0=t0,
        indices=pos,
        stream=stream,
        event_start=config.event_start,
        tracking_end=config.tracking_end,
    )


@dataclass
class Detection:
    """Per-stage tag sets for one episode."""

    config: EpisodeConfig
    novel: set
    pop: set
    relevant: set
    user_counts: dict

    def table(self, stream: EventStream) -> pd.DataFrame:
        rows = []
        for tag in sorted(self.relevant):
            pos = _tracked_positions(stream, self.config, tag)
            rows.append(
                {
                    "tag": tag,
                    "episode_id": self.config.episode_id,
                    "t0": float(stream.timestamps[pos[0]]),
                    "user_count": self.user_counts[tag],
                }
            )
        return pd.DataFrame(rows, columns=["tag", "episode_id", "t0", "user_count"])


def detect_all(stream: EventStream, configs: Sequence[EpisodeConfig], slack: float = 60.0) -> list:
    """Run the three filters for every episode.

    A tag counts as novel in at most one episode: the earliest one in which it
    qualifies.
    """
    claimed: set = set()
    out = []
    for cfg in sorted(configs, key=lambda c: (c.event_start, c.episode_id)):
        novel = find_novel(stream, cfg, slack=slack) - claimed
        claimed |= novel
        counts = {t: user_count(stream, cfg, t) for t in novel}
        pop = {t for t in novel if counts[t] >= cfg.min_users}
        relevant = filter_relevant(stream, pop, cfg.keywords, cfg)
        out.append(Detection(cfg, novel, pop, relevant, {t: counts[t] for t in pop}))
    return out


class HashtagDetector(TransformerMixin, BaseEstimator):
    """Detect relevant novel hashtags for one episode.

    ``fit`` records the per-stage tag sets; ``transform`` returns the
    :class:`HashtagEpisode` list for the relevant tags, sorted by tag.

    Parameters
    ----------
    config : EpisodeConfig
    slack : float, default=60.0
        Seconds of tolerance for the lookback coverage check.
    """

    def __init__(self, config: Optional[EpisodeConfig] = None, slack: float = 60.0):
        self.config = config
        self.slack = slack

    def fit(self, stream: EventStream, y=None):
        if self.config is None:
            raise ValueError("HashtagDetector needs an EpisodeConfig")
        det = detect_all(stream, [self.config], slack=self.slack)[0]
        self.novel_ = det.novel
        self.pop_ = det.pop
        self.relevant_ = det.relevant
        self.user_counts_ = det.user_counts
        return self

    def transform(self, stream: EventStream) -> list:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "relevant_")
        return [build_episode(stream, self.config, t) for t in sorted(self.relevant_)]
