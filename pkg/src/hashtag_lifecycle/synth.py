"""Synthetic streams and model-level datasets with known ground truth.

All generators are pure functions of their arguments; every random draw comes
from a ``numpy.random.Generator`` seeded by the caller.

Planted hashtag curves
    A planted tag with parameters (L, k, m) has mean cumulative count
    ``A(tau) = 1 + (L - 1) / (1 + exp(-k (tau - m)))`` at the end of minute
    ``tau`` after its onset: one seed tweet at onset plus a logistic wave.
    Per-minute counts are Poisson draws of the increments of ``A``, or, with
    ``zero_noise``, the increments of ``round(A)``.

Follower counts
    ``floor(50 * (1 + Pareto(1.2)))``, drawn once per user.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from .episodes import EpisodeConfig, HashtagEpisode, build_episode
from .events import EventStream, TweetEvent
from .growth import BASE_PREDICTORS, RegressionDesign, is_invertible, is_stationary
from .survival import SurvivalRecord

__all__ = [
    "PlantedTag",
    "ScenarioSpec",
    "GroundTruth",
    "ScenarioError",
    "standard_scenario",
    "gen_debate_scenario",
    "gen_logistic_stream",
    "logistic_counts",
    "gen_armax_series",
    "gen_survival_cohort",
    "gen_trajectory_features",
    "logistic_mean",
]

FOLLOWER_SCALE = 50
FOLLOWER_SHAPE = 1.2
DEFAULT_EVENT_START = 1_349_395_200.0  # 2012-10-05T00:00:00Z

_RELEVANT_TEXT = (
    "watching the debate {tag}",
    "the president just said that {tag}",
    "{tag} best line of the debate",
    "cannot believe this debate {tag}",
)
_PLAIN_TEXT = ("so true {tag}", "lol {tag}", "{tag} right now", "everyone is talking {tag}")
_BACKGROUND_TAGS = ("debates", "tcot", "p2", "obama", "romney", "election2012", "nfl", "mlb", "music", "news")
_BACKGROUND_TEXT = (
    "thoughts on the debate",
    "news update",
    "game night",
    "who won the debate",
    "listening to music",
    "president watch",
    "weekend plans",
)


class ScenarioError(ValueError):
    """The scenario cannot be realized as specified."""


def logistic_mean(tau, L: float, k: float, midpoint: float) -> np.ndarray:
    """Mean cumulative count of a planted tag ``tau`` minutes after onset."""
    tau = np.asarray(tau, dtype=float)
    return 1.0 + (L - 1.0) / (1.0 + np.exp(-k * (tau - midpoint)))


def _follower_counts(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.floor(FOLLOWER_SCALE * (1.0 + rng.pareto(FOLLOWER_SHAPE, n))).astype(np.int64)


def _minute_counts(L, k, midpoint, n_minutes, rng, zero_noise) -> np.ndarray:
    cum = logistic_mean(np.arange(n_minutes), L, k, midpoint)
    if zero_noise:
        return np.diff(np.round(cum), prepend=0.0).astype(np.int64)
    lam = np.diff(cum, prepend=1.0)
    counts = rng.poisson(np.maximum(lam, 0.0))
    counts[0] += 1
    return counts.astype(np.int64)


def _offsets(rng, n) -> np.ndarray:
    # sorted within-minute offsets on a millisecond grid
    return np.sort(np.floor(rng.uniform(0.0, 60.0, n) * 1000.0) / 1000.0)


# -- scenario spec ---------------------------------------------------------------


@dataclass
class PlantedTag:
    """One scripted hashtag.

    ``onset_minute`` is relative to the episode start; ``midpoint`` is
    relative to the onset.  ``archetype`` is ``logistic``, ``burst`` (all mass
    within a few minutes) or ``flat`` (constant rate).  A ``novel=False`` tag
    also appears ``lookback_events`` times before the episode.
    """

    tag: str
    L: float
    k: float = 0.02
    midpoint: float = 120.0
    onset_minute: int = 0
    archetype: str = "logistic"
    rt_frac: float = 0.3
    rp_frac: float = 0.1
    n_users: int = 150
    novel: bool = True
    relevant: bool = True
    label: str = "also_ran"
    lookback_events: int = 10
    episode: int = 0

    def __post_init__(self):
        if self.L < 1:
            raise ScenarioError(f"{self.tag}: L must be at least 1")
        if self.k <= 0:
            raise ScenarioError(f"{self.tag}: k must be positive")
        for name in ("rt_frac", "rp_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ScenarioError(f"{self.tag}: {name} must lie in [0, 1]")
        if self.rt_frac + self.rp_frac > 1.0:
            raise ScenarioError(f"{self.tag}: rt_frac + rp_frac exceeds 1")
        if self.archetype not in ("logistic", "burst", "flat"):
            raise ScenarioError(f"{self.tag}: unknown archetype {self.archetype!r}")
        if self.n_users < 1:
            raise ScenarioError(f"{self.tag}: n_users must be positive")


@dataclass
class ScenarioSpec:
    seed: int
    episodes: list
    tags: list
    n_users: int = 20000
    background_rate: float = 6.0
    zero_noise: bool = False

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "episodes": [e.to_dict() for e in self.episodes],
            "tags": [asdict(t) for t in self.tags],
            "n_users": self.n_users,
            "background_rate": self.background_rate,
            "zero_noise": self.zero_noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            seed=int(d["seed"]),
            episodes=[EpisodeConfig.from_dict(e) for e in d["episodes"]],
            tags=[PlantedTag(**t) for t in d["tags"]],
            n_users=int(d.get("n_users", 20000)),
            background_rate=float(d.get("background_rate", 6.0)),
            zero_noise=bool(d.get("zero_noise", False)),
        )


def standard_scenario(seed: int = 0, zero_noise: bool = False, event_start: float = DEFAULT_EVENT_START) -> ScenarioSpec:
    """One debate episode: 23 novel tags (12 pop, 10 relevant) and 4 decoys.

    Of the 10 relevant tags 4 are winners (large, fast, long-lived) and 6
    are also-rans.  The two irrelevant pop tags never co-occur with a keyword.
    Tag parameters are drawn from ``seed``.
    """
    rng = np.random.default_rng([seed, 7])
    cfg = EpisodeConfig(episode_id="d1", event_start=event_start)
    tags = []
    winners = ["bigbird", "bindersfullofwomen", "horsesandbayonets", "malarkey"]
    also = ["savebigbird", "sketchydeal", "detailsmatter", "proudofobama", "strongerwithobama", "obamadebateexcuses"]
    for name in winners:
        tags.append(
            PlantedTag(
                tag=name,
                L=float(rng.integers(4000, 8001)),
                k=float(rng.uniform(0.010, 0.015)),
                midpoint=float(rng.uniform(200, 400)),
                onset_minute=int(rng.integers(0, 60)),
                rt_frac=float(rng.uniform(0.3, 0.5)),
                rp_frac=float(rng.uniform(0.05, 0.15)),
                n_users=int(rng.integers(1500, 3000)),
                label="winner",
            )
        )
    for name in also:
        tags.append(
            PlantedTag(
                tag=name,
                L=float(rng.integers(300, 1001)),
                k=float(rng.uniform(0.02, 0.04)),
                midpoint=float(rng.uniform(60, 150)),
                onset_minute=int(rng.integers(0, 115)),
                rt_frac=float(rng.uniform(0.2, 0.4)),
                rp_frac=float(rng.uniform(0.05, 0.2)),
                n_users=int(rng.integers(150, 300)),
                label="also_ran",
            )
        )
    for name in ("nflsunday", "gameofthronesnight"):
        tags.append(
            PlantedTag(
                tag=name,
                L=float(rng.integers(400, 900)),
                k=float(rng.uniform(0.02, 0.04)),
                midpoint=float(rng.uniform(60, 150)),
                onset_minute=int(rng.integers(0, 115)),
                n_users=int(rng.integers(150, 300)),
                relevant=False,
                label="irrelevant",
            )
        )
    for i in range(11):
        tags.append(
            PlantedTag(
                tag=f"smalltalk{i:02d}",
                L=float(rng.integers(40, 120)),
                k=float(rng.uniform(0.03, 0.08)),
                midpoint=float(rng.uniform(30, 90)),
                onset_minute=int(rng.integers(0, 115)),
                n_users=int(rng.integers(20, 90)),
                relevant=bool(i % 2 == 0),
                label="small",
            )
        )
    for name in ("debate2012", "gop", "dems", "fourmoreyears"):
        tags.append(
            PlantedTag(
                tag=name,
                L=float(rng.integers(400, 900)),
                k=float(rng.uniform(0.02, 0.04)),
                midpoint=float(rng.uniform(60, 150)),
                onset_minute=int(rng.integers(0, 115)),
                n_users=int(rng.integers(150, 300)),
                novel=False,
                label="decoy",
            )
        )
    return ScenarioSpec(seed=seed, episodes=[cfg], tags=tags, zero_noise=zero_noise)


# -- ground truth ------------------------------------------------------------------


@dataclass
class TagTruth:
    tag: str
    episode_id: str
    label: str
    onset_minute: int
    L: float
    k: float
    midpoint: float
    growth: float
    t_e: float
    counts: np.ndarray = field(repr=False)
    rt: np.ndarray = field(repr=False)
    rp: np.ndarray = field(repr=False)
    n_events: int = 0
    n_users: int = 0


@dataclass
class GroundTruth:
    """Bookkeeping recorded while emitting a dataset.

    Per-minute arrays are indexed by minute since the episode start.
    """

    novel: dict = field(default_factory=dict)
    pop: dict = field(default_factory=dict)
    relevant: dict = field(default_factory=dict)
    tags: dict = field(default_factory=dict)
    total_rt: dict = field(default_factory=dict)
    total_rp: dict = field(default_factory=dict)
    total_events: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (set, frozenset)):
                return sorted(v)
            if isinstance(v, dict):
                return {str(k): conv(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, TagTruth):
                return conv(asdict(v))
            if isinstance(v, np.generic):
                return v.item()
            return v

        return conv(
            {
                "novel": self.novel,
                "pop": self.pop,
                "relevant": self.relevant,
                "tags": {t: {k: v for k, v in asdict(tt).items() if k not in ("counts", "rt", "rp")} for t, tt in self.tags.items()},
                "stats": self.stats,
                "params": self.params,
                "labels": self.labels,
            }
        )


# -- debate scenario ------------------------------------------------------------------


class _Emitter:
    def __init__(self, rng, n_users):
        self.rng = rng
        self.users = np.array([f"u{i:06d}" for i in range(n_users)], dtype=object)
        self.followers = _follower_counts(rng, n_users)
        self.events = []

    def emit(self, eid, ts, uidx, text, tags, retweet_of=None, reply_to=None):
        self.events.append(
            TweetEvent(
                event_id=eid,
                timestamp=float(ts),
                user_id=self.users[uidx],
                follower_count=int(self.followers[uidx]),
                text=text,
                hashtags=frozenset(tags),
                retweet_of=retweet_of,
                reply_to=reply_to,
            )
        )


def _planted_counts(t: PlantedTag, n_minutes: int, rng, zero_noise: bool) -> np.ndarray:
    if t.archetype == "logistic":
        return _minute_counts(t.L, t.k, t.midpoint, n_minutes, rng, zero_noise)
    if t.archetype == "burst":
        return _minute_counts(t.L, 2.0, 2.0, n_minutes, rng, zero_noise)
    # flat: L spread evenly over the window
    cum = 1.0 + (t.L - 1.0) * np.arange(1, n_minutes + 1) / n_minutes
    if zero_noise:
        return np.diff(np.round(cum), prepend=0.0).astype(np.int64)
    counts = rng.poisson(np.diff(cum, prepend=1.0))
    counts[0] += 1
    return counts.astype(np.int64)


def _check_feasible(spec: ScenarioSpec) -> None:
    if not spec.episodes:
        raise ScenarioError("scenario needs at least one episode")
    names = [t.tag for t in spec.tags]
    if len(set(names)) != len(names):
        raise ScenarioError("planted tag names must be unique")
    clash = set(names) & set(_BACKGROUND_TAGS)
    if clash:
        raise ScenarioError(f"planted tags collide with background tags: {sorted(clash)}")
    for t in spec.tags:
        if t.episode >= len(spec.episodes):
            raise ScenarioError(f"{t.tag}: unknown episode index {t.episode}")
        cfg = spec.episodes[t.episode]
        if t.n_users > spec.n_users:
            raise ScenarioError(f"{t.tag}: user pool {t.n_users} exceeds the {spec.n_users} available users")
        if not 0 <= t.onset_minute < cfg.peak_duration:
            raise ScenarioError(f"{t.tag}: onset minute {t.onset_minute} outside the peak window")
        if not t.relevant and any(k in t.tag for k in cfg.keywords):
            raise ScenarioError(f"{t.tag}: irrelevant tag name contains a keyword")
    for cfg in spec.episodes:
        if cfg.min_users > spec.n_users:
            raise ScenarioError(f"min_users {cfg.min_users} exceeds the user pool of {spec.n_users}")


def gen_debate_scenario(spec: ScenarioSpec) -> tuple:
    """Emit a lookback + tracking stream realizing ``spec``.

    Returns
    -------
    stream : EventStream
    truth : GroundTruth
        Planted stage sets per episode, per-tag per-minute scripts and the
        per-minute retweet/reply totals over the tracking window.
    """
    _check_feasible(spec)
    rng = np.random.default_rng(spec.seed)
    em = _Emitter(rng, spec.n_users)
    truth = GroundTruth()

    start = min(c.lookback_start for c in spec.episodes)
    end = max(c.tracking_end for c in spec.episodes)

    for ti, t in enumerate(spec.tags):
        cfg = spec.episodes[t.episode]
        n_minutes = cfg.n_minutes
        window = n_minutes - t.onset_minute
        counts = _planted_counts(t, window, rng, spec.zero_noise)
        n = int(counts.sum())
        pool = rng.choice(spec.n_users, size=t.n_users, replace=False)
        # cycle through the pool first so distinct users = min(pool, n)
        who = np.concatenate([rng.permutation(pool)[: min(n, t.n_users)], rng.choice(pool, size=max(n - t.n_users, 0))])
        roles = rng.choice(3, size=n, p=[1.0 - t.rt_frac - t.rp_frac, t.rt_frac, t.rp_frac])
        roles[0] = 0
        keyword = rng.random(n) < 0.5
        keyword[0] = True
        token = "#" + t.tag
        texts = _RELEVANT_TEXT if t.relevant else _PLAIN_TEXT

        abs_counts = np.zeros(n_minutes, dtype=np.int64)
        abs_rt = np.zeros(n_minutes, dtype=np.int64)
        abs_rp = np.zeros(n_minutes, dtype=np.int64)
        originals = []
        j = 0
        for tau in np.flatnonzero(counts):
            c = int(counts[tau])
            minute = t.onset_minute + int(tau)
            base = cfg.event_start + 60.0 * minute
            for off in _offsets(rng, c):
                eid = f"p{ti:03d}-{j:06d}"
                text = texts[j % len(texts)].format(tag=token) if keyword[j] else _PLAIN_TEXT[j % len(_PLAIN_TEXT)].format(tag=token)
                role = roles[j] if originals else 0
                if role == 1:
                    src = originals[int(rng.integers(len(originals)))]
                    em.emit(eid, base + off, who[j], f"RT {src[1]}", [t.tag], retweet_of=src[0])
                    abs_rt[minute] += 1
                elif role == 2:
                    em.emit(eid, base + off, who[j], text, [t.tag], reply_to=em.users[int(rng.integers(spec.n_users))])
                    abs_rp[minute] += 1
                else:
                    em.emit(eid, base + off, who[j], text, [t.tag])
                    originals.append((eid, text))
                abs_counts[minute] += 1
                j += 1

        if not t.novel:
            when = np.sort(rng.uniform(cfg.lookback_start, cfg.event_start - 3600.0, t.lookback_events))
            for i, ts in enumerate(when):
                em.emit(f"p{ti:03d}-pre{i:04d}", np.floor(ts * 1000) / 1000, int(rng.integers(spec.n_users)), f"old news {token}", [t.tag])

        growth = (t.L - 1.0) * t.k / 4.0 if t.archetype == "logistic" else float("nan")
        t_e = t.onset_minute + t.midpoint + math.log(99.0) / t.k if t.archetype == "logistic" else float("nan")
        truth.tags[t.tag] = TagTruth(
            tag=t.tag,
            episode_id=cfg.episode_id,
            label=t.label,
            onset_minute=t.onset_minute,
            L=t.L,
            k=t.k,
            midpoint=t.midpoint,
            growth=growth,
            t_e=t_e,
            counts=abs_counts,
            rt=abs_rt,
            rp=abs_rp,
            n_events=n,
            n_users=min(n, t.n_users),
        )

    _emit_background(spec, em, rng, start, end)

    stream = EventStream.from_events(em.events)

    for cfg in spec.episodes:
        eid = cfg.episode_id
        mine = [t for t in spec.tags if spec.episodes[t.episode] is cfg]
        novel = {t.tag for t in mine if t.novel}
        pop = {t.tag for t in mine if t.novel and truth.tags[t.tag].n_users >= cfg.min_users}
        relevant = {t for t in pop if next(p for p in mine if p.tag == t).relevant}
        truth.novel[eid], truth.pop[eid], truth.relevant[eid] = novel, pop, relevant
        sl = stream.window(cfg.event_start, cfg.tracking_end)
        ts = stream.timestamps[sl]
        minutes = np.floor((ts - cfg.event_start) / 60.0).astype(np.int64)
        truth.total_rt[eid] = np.bincount(minutes[stream.is_retweet[sl]], minlength=cfg.n_minutes)[: cfg.n_minutes]
        truth.total_rp[eid] = np.bincount(minutes[stream.is_reply[sl]], minlength=cfg.n_minutes)[: cfg.n_minutes]
        truth.total_events[eid] = np.bincount(minutes, minlength=cfg.n_minutes)[: cfg.n_minutes]
        truth.labels.update({t.tag: t.label for t in mine})

    truth.stats = {
        "event_count": len(em.events),
        "unique_users": len({e.user_id for e in em.events}),
        "retweet_count": sum(e.retweet_of is not None for e in em.events),
        "reply_count": sum(e.retweet_of is None and e.reply_to is not None for e in em.events),
    }
    truth.params = {"spec": spec.to_dict()}
    return stream, truth


def _emit_background(spec: ScenarioSpec, em: _Emitter, rng, start: float, end: float) -> None:
    n_minutes = int(math.ceil((end - start) / 60.0))
    per_min = rng.poisson(spec.background_rate, n_minutes)
    n = int(per_min.sum())
    minute = np.repeat(np.arange(n_minutes), per_min)
    ts = start + 60.0 * minute + np.floor(rng.uniform(0, 60, n) * 1000) / 1000
    ts = np.sort(ts)
    if n:
        ts[0] = start  # the stream starts exactly at the lookback start
    roles = rng.choice(3, size=n, p=[0.55, 0.3, 0.15])
    tag_pick = rng.integers(-len(_BACKGROUND_TAGS), len(_BACKGROUND_TAGS), n)
    users = rng.integers(spec.n_users, size=n)
    text_pick = rng.integers(len(_BACKGROUND_TEXT), size=n)
    recent: list = []
    for i in range(n):
        eid = f"b{i:07d}"
        # every background tag appears in the first minutes so none looks novel
        tag = _BACKGROUND_TAGS[i] if i < len(_BACKGROUND_TAGS) else (_BACKGROUND_TAGS[tag_pick[i]] if tag_pick[i] >= 0 else None)
        tags = [tag] if tag else []
        text = _BACKGROUND_TEXT[text_pick[i]] + (f" #{tag}" if tag else "")
        role = roles[i] if recent else 0
        if role == 1:
            src = recent[int(rng.integers(len(recent)))]
            em.emit(eid, ts[i], users[i], f"RT {text}", tags, retweet_of=src)
        elif role == 2:
            em.emit(eid, ts[i], users[i], text, tags, reply_to=em.users[int(rng.integers(spec.n_users))])
        else:
            em.emit(eid, ts[i], users[i], text, tags)
            recent.append(eid)
            if len(recent) > 500:
                recent.pop(0)


# -- single logistic curve ---------------------------------------------------------------


def logistic_counts(L: float, k: float, midpoint: float, seed: int = 0, noise: bool = True, horizon: Optional[int] = None) -> np.ndarray:
    """Per-minute counts of the planted logistic archetype without building events.

    Same draws as the ``counts`` recorded by :func:`gen_logistic_stream` for
    the same arguments.
    """
    if L < 1 or k <= 0:
        raise ScenarioError("need L >= 1 and k > 0")
    if horizon is None:
        horizon = int(math.ceil(midpoint + 2.0 * math.log(99.0) / k)) + 1
    return _minute_counts(L, k, midpoint, horizon, np.random.default_rng(seed), zero_noise=not noise)


def gen_logistic_stream(
    L: float,
    k: float,
    midpoint: float,
    seed: int = 0,
    noise: bool = True,
    horizon: Optional[int] = None,
    event_start: float = 0.0,
    tag: str = "logistic",
) -> tuple:
    """One hashtag following the planted logistic archetype from minute 0.

    ``horizon`` (minutes) defaults to ``midpoint + 2 ln(99) / k``.  Returns the
    :class:`HashtagEpisode` and a :class:`GroundTruth` whose ``tags[tag]``
    carries the analytic growth ``L k / 4`` and ``t_e = midpoint + ln(99)/k``.
    With ``L = 1`` the stream is a single tweet.
    """
    if L < 1 or k <= 0:
        raise ScenarioError("need L >= 1 and k > 0")
    rng = np.random.default_rng(seed)
    if horizon is None:
        horizon = int(math.ceil(midpoint + 2.0 * math.log(99.0) / k)) + 1
    counts = _minute_counts(L, k, midpoint, horizon, rng, zero_noise=not noise)
    events = []
    j = 0
    for m in np.flatnonzero(counts):
        for off in _offsets(rng, int(counts[m])):
            events.append(
                TweetEvent(
                    event_id=f"e{j:07d}",
                    timestamp=float(event_start + 60.0 * m + off),
                    user_id=f"u{j:07d}",
                    follower_count=100,
                    text=f"#{tag}",
                    hashtags=frozenset([tag]),
                )
            )
            j += 1
    stream = EventStream.from_events(events)
    # the whole horizon serves as peak window so any first minute qualifies
    cfg = EpisodeConfig(
        episode_id="logistic", event_start=event_start, peak_duration=horizon, tracking=horizon / 60.0, min_users=1
    )
    episode = build_episode(stream, cfg, tag)
    truth = GroundTruth()
    truth.tags[tag] = TagTruth(
        tag=tag,
        episode_id="logistic",
        label="",
        onset_minute=0,
        L=L,
        k=k,
        midpoint=midpoint,
        growth=L * k / 4.0,
        t_e=midpoint + math.log(99.0) / k,
        counts=counts,
        rt=np.zeros_like(counts),
        rp=np.zeros_like(counts),
        n_events=int(counts.sum()),
        n_users=int(counts.sum()),
    )
    return episode, truth


# -- regression with ARMA errors -----------------------------------------------------


def _positive_predictors(rng, length: int) -> np.ndarray:
    # smooth positive intensities -> counts -> model-scale predictors
    t = np.arange(length)
    peak = rng.uniform(0.2, 0.8) * length
    width = rng.uniform(0.15, 0.4) * length
    shape = np.exp(-0.5 * ((t - peak) / width) ** 2)
    rt = rng.poisson(rng.uniform(5, 40) * shape + 0.5)
    rp = rng.poisson(rng.uniform(1, 10) * shape + 0.2)
    src = np.cumsum(rng.binomial(rt, 0.3))
    follow = np.maximum.accumulate(np.floor(FOLLOWER_SCALE * (1 + rng.pareto(FOLLOWER_SHAPE, length))))
    return np.column_stack([np.log1p(rt), np.log1p(rp), src.astype(float), np.log1p(follow)])


def gen_armax_series(
    beta: Sequence[float],
    phi: Sequence[float] = (0.5, -0.2),
    psi: Sequence[float] = (0.3,),
    sigma2: float = 1.0,
    segments: int = 200,
    length: int = 60,
    seed: int = 0,
    intercept: float = 0.0,
    burn_in: int = 500,
) -> tuple:
    """Simulate the growth model with ARMA(p, q) errors over independent segments.

    Predictors per segment are transformed retweet/reply counts from a
    Gaussian-bump Poisson intensity, the running count of distinct sources and
    the log of a running-maximum audience size, in that order.  Errors start
    each segment after ``burn_in`` unrecorded steps, which makes them
    stationary to machine precision for the default parameters.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    beta = np.asarray(beta, dtype=float)
    if not is_stationary(phi):
        raise ScenarioError(f"AR parameters {phi} are not stationary")
    if not is_invertible(psi):
        raise ScenarioError(f"MA parameters {psi} are not invertible")
    if sigma2 <= 0:
        raise ScenarioError("sigma2 must be positive")
    rng = np.random.default_rng(seed)
    Xs, ys, gs = [], [], []
    for s in range(segments):
        X = _positive_predictors(rng, length)[:, : len(beta)]
        v = rng.normal(0.0, math.sqrt(sigma2), burn_in + length)
        e = lfilter(np.r_[1.0, psi], np.r_[1.0, -phi], v)[burn_in:]
        ys.append(intercept + X @ beta + e)
        Xs.append(X)
        gs.append(np.full(length, s))
    design = RegressionDesign(
        y=np.concatenate(ys),
        X=np.vstack(Xs),
        columns=list(BASE_PREDICTORS[: len(beta)]) if len(beta) <= 4 else [f"x{i}" for i in range(len(beta))],
        groups=np.concatenate(gs),
        minutes=np.tile(np.arange(1, length + 1), segments),
    )
    truth = GroundTruth(
        params={"beta": beta, "intercept": intercept, "phi": phi, "psi": psi, "sigma2": sigma2, "segments": segments, "length": length}
    )
    return design, truth


# -- survival cohort -------------------------------------------------------------------


def gen_survival_cohort(
    beta: Sequence[float],
    rate: float,
    n: int,
    censor_time: float = np.inf,
    seed: int = 0,
    covariates: str = "normal",
    resolution: Optional[float] = None,
    names: Optional[Sequence[str]] = None,
) -> tuple:
    """Exponential proportional-hazards cohort.

    Hazard is ``rate * exp(x @ beta)``.  With ``covariates="group"`` the first
    column is a balanced 0/1 indicator (first half 0) and any others are
    standard normal; ``"normal"`` makes every column standard normal.
    Subjects still alive at ``censor_time`` are censored there.  ``resolution``
    rounds durations to that grid (e.g. 1 for whole minutes).
    """
    if rate <= 0:
        raise ScenarioError("rate must be positive")
    if n < 2:
        raise ScenarioError("cohort needs at least 2 subjects")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    rng = np.random.default_rng(seed)
    p = len(beta)
    X = rng.standard_normal((n, p))
    if covariates == "group":
        X[:, 0] = (np.arange(n) >= n // 2).astype(float)
    elif covariates != "normal":
        raise ScenarioError(f"unknown covariate design {covariates!r}")
    T = rng.exponential(1.0 / (rate * np.exp(X @ beta)))
    event = T <= censor_time
    dur = np.where(event, T, censor_time)
    if resolution:
        dur = np.round(dur / resolution) * resolution
    names = list(names) if names is not None else [f"x{i}" for i in range(p)]
    records = [
        SurvivalRecord(tag=f"s{i:06d}", duration=float(dur[i]), event=bool(event[i]), covariates=dict(zip(names, X[i])))
        for i in range(n)
    ]
    truth = GroundTruth(params={"beta": beta, "hazard_ratio": np.exp(beta), "rate": rate, "times": T, "censor_time": censor_time})
    return records, truth


# -- trajectory feature blobs ---------------------------------------------------------------


def gen_trajectory_features(n_winners: int = 12, n_also: int = 50, separation: float = 5.0, seed: int = 0) -> tuple:
    """Two Gaussian blobs of (final_size, growth, persistence).

    Within-cluster standard deviations are 400 tweets, 3 tpm and 150 min; the
    winner centre sits ``separation`` of those units away along each axis
    scaled by ``1/sqrt(3)``.  Returns the feature frame and planted labels.
    """
    rng = np.random.default_rng(seed)
    sd = np.array([400.0, 3.0, 150.0])
    base = np.array([1500.0, 10.0, 600.0])
    shift = separation / math.sqrt(3.0) * sd
    Zw = rng.standard_normal((n_winners, 3))
    Za = rng.standard_normal((n_also, 3))
    feats = np.vstack([base + shift + Zw * sd, base + Za * sd])
    feats = np.maximum(feats, 1.0)
    labels = np.array(["winner"] * n_winners + ["also_ran"] * n_also, dtype=object)
    order = rng.permutation(len(labels))
    df = pd.DataFrame(feats[order], columns=["final_size", "growth", "persistence"])
    df.insert(0, "tag", [f"h{i:04d}" for i in range(len(order))])
    return df, labels[order]
