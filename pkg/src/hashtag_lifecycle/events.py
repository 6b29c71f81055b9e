"""Tweet event records, stream parsing/serialization and validation."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Optional, Union

import numpy as np

__all__ = [
    "TweetEvent",
    "EventStream",
    "StreamStats",
    "ParseError",
    "StreamError",
    "FIELDS",
    "extract_hashtags",
    "parse_events",
    "serialize_events",
    "read_events",
    "write_events",
    "validate_stream",
]

FIELDS = (
    "event_id",
    "timestamp",
    "user_id",
    "follower_count",
    "text",
    "hashtags",
    "retweet_of",
    "reply_to",
)

_HASHTAG_RE = re.compile(r"#([A-Za-z0-9_]+)")
_TAG_RE = re.compile(r"^[a-z0-9_]+$")


class ParseError(ValueError):
    """A record could not be parsed; carries the 1-based line number and field."""

    def __init__(self, line: int, field_name: Optional[str], message: str):
        self.line = line
        self.field = field_name
        where = f"line {line}" + (f", field '{field_name}'" if field_name else "")
        super().__init__(f"{where}: {message}")


class StreamError(ValueError):
    """A parsed stream violates a cross-record invariant."""


def extract_hashtags(text: str) -> frozenset:
    """Return the normalized hashtags in ``text``.

    Every maximal ``#[A-Za-z0-9_]+`` token is lowercased and stripped of its
    ``#``; duplicates collapse.

    >>> sorted(extract_hashtags("#BigBird #bigbird wtf #Debates!"))
    ['bigbird', 'debates']
    """
    if not text:
        return frozenset()
    return frozenset(m.group(1).lower() for m in _HASHTAG_RE.finditer(text))


@dataclass(frozen=True)
class TweetEvent:
    event_id: str
    timestamp: float
    user_id: str
    follower_count: int
    text: str = ""
    hashtags: frozenset = field(default_factory=frozenset)
    retweet_of: Optional[str] = None
    reply_to: Optional[str] = None

    def __post_init__(self):
        if self.follower_count < 0:
            raise ValueError("follower_count must be non-negative")
        if self.retweet_of is not None and self.retweet_of == self.event_id:
            raise ValueError("retweet_of references the event itself")
        if self.reply_to is not None and self.reply_to == self.event_id:
            raise ValueError("reply_to references the event itself")
        for tag in self.hashtags:
            if not isinstance(tag, str) or not _TAG_RE.match(tag):
                raise ValueError(f"hashtag {tag!r} is not a normalized label")

    @property
    def is_retweet(self) -> bool:
        return self.retweet_of is not None

    @property
    def is_reply(self) -> bool:
        # retweet wins when both links are present
        return self.reply_to is not None and self.retweet_of is None


@dataclass(frozen=True)
class EventStream:
    """Immutable, timestamp-ordered sequence of events.

    Construct through :meth:`from_events` to get the canonical ordering
    (timestamp, then event_id).
    """

    events: tuple

    @classmethod
    def from_events(cls, events: Iterable[TweetEvent]) -> "EventStream":
        return cls(tuple(sorted(events, key=lambda e: (e.timestamp, e.event_id))))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    @cached_property
    def timestamps(self) -> np.ndarray:
        return np.fromiter((e.timestamp for e in self.events), dtype=float, count=len(self.events))

    @cached_property
    def is_retweet(self) -> np.ndarray:
        return np.fromiter((e.is_retweet for e in self.events), dtype=bool, count=len(self.events))

    @cached_property
    def is_reply(self) -> np.ndarray:
        return np.fromiter((e.is_reply for e in self.events), dtype=bool, count=len(self.events))

    @cached_property
    def tag_index(self) -> dict:
        """Map each hashtag to the sorted array of event positions carrying it."""
        index: dict = {}
        for i, e in enumerate(self.events):
            for tag in e.hashtags:
                index.setdefault(tag, []).append(i)
        return {tag: np.asarray(pos, dtype=np.int64) for tag, pos in index.items()}

    @cached_property
    def cache(self) -> dict:
        """Scratch space for derived indexes shared by feature extractors."""
        return {}

    def window(self, start: float, stop: float) -> slice:
        """Positional slice of events with ``start <= timestamp < stop``."""
        ts = self.timestamps
        return slice(int(np.searchsorted(ts, start, "left")), int(np.searchsorted(ts, stop, "left")))

    @property
    def span(self) -> tuple:
        if not self.events:
            return (None, None)
        return (self.events[0].timestamp, self.events[-1].timestamp)


@dataclass(frozen=True)
class StreamStats:
    event_count: int = 0
    unique_users: int = 0
    time_span: tuple = (None, None)
    retweet_count: int = 0
    reply_count: int = 0

    def render(self) -> str:
        lo, hi = self.time_span
        lines = [
            f"events        {self.event_count}",
            f"unique users  {self.unique_users}",
            f"retweets      {self.retweet_count}",
            f"replies       {self.reply_count}",
            f"time span     {_fmt_ts(lo)} .. {_fmt_ts(hi)}",
        ]
        return "\n".join(lines)


def _fmt_ts(ts) -> str:
    if ts is None:
        return "-"
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


# -- parsing -----------------------------------------------------------------


def _parse_timestamp(value, line: int) -> float:
    if isinstance(value, bool):
        raise ParseError(line, "timestamp", "boolean is not a timestamp")
    if isinstance(value, (int, float)):
        if not np.isfinite(value):
            raise ParseError(line, "timestamp", "non-finite timestamp")
        return float(value)
    if isinstance(value, str):
        s = value.strip()
        try:
            return float(int(s))
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            pass
        try:
            dt = datetime.fromisoformat(s.replace("Z", "+00:00").replace("z", "+00:00"))
        except ValueError:
            raise ParseError(line, "timestamp", f"unparsable timestamp {value!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    raise ParseError(line, "timestamp", f"unparsable timestamp {value!r}")


def _opt_str(value) -> Optional[str]:
    if value is None:
        return None
    s = str(value)
    return s if s != "" else None


def _record_to_event(rec: dict, line: int, csv_mode: bool) -> TweetEvent:
    for name in ("event_id", "timestamp", "user_id", "follower_count"):
        if name not in rec or rec[name] is None or rec[name] == "":
            raise ParseError(line, name, "missing required field")
    unknown = set(rec) - set(FIELDS)
    if unknown:
        raise ParseError(line, sorted(unknown)[0], "unknown field")

    timestamp = _parse_timestamp(rec["timestamp"], line)
    fc = rec["follower_count"]
    try:
        if isinstance(fc, bool) or (isinstance(fc, float) and not fc.is_integer()):
            raise ValueError
        follower_count = int(fc)
    except (TypeError, ValueError):
        raise ParseError(line, "follower_count", f"not an integer: {fc!r}") from None
    if follower_count < 0:
        raise ParseError(line, "follower_count", "must be non-negative")

    text = rec.get("text") or ""
    if not isinstance(text, str):
        raise ParseError(line, "text", "must be a string")

    raw_tags = rec.get("hashtags")
    if "hashtags" not in rec or (raw_tags is None and not csv_mode):
        hashtags = extract_hashtags(text)
    else:
        if csv_mode:
            items = [t for t in (raw_tags or "").split(";") if t != ""]
        elif isinstance(raw_tags, (list, tuple)):
            items = list(raw_tags)
        else:
            raise ParseError(line, "hashtags", "must be a list")
        tags = set()
        for t in items:
            if not isinstance(t, str):
                raise ParseError(line, "hashtags", f"non-string hashtag {t!r}")
            norm = t.lstrip("#").lower()
            if not _TAG_RE.match(norm):
                raise ParseError(line, "hashtags", f"invalid hashtag {t!r}")
            tags.add(norm)
        hashtags = frozenset(tags)

    event_id = str(rec["event_id"])
    retweet_of = _opt_str(rec.get("retweet_of"))
    reply_to = _opt_str(rec.get("reply_to"))
    if retweet_of is not None:
        reply_to = None
    if retweet_of == event_id:
        raise ParseError(line, "retweet_of", "references the event itself")
    if reply_to == event_id:
        raise ParseError(line, "reply_to", "references the event itself")

    return TweetEvent(
        event_id=event_id,
        timestamp=timestamp,
        user_id=str(rec["user_id"]),
        follower_count=follower_count,
        text=text,
        hashtags=hashtags,
        retweet_of=retweet_of,
        reply_to=reply_to,
    )


def _as_text_lines(lines) -> list:
    out = []
    for ln in lines:
        if isinstance(ln, bytes):
            ln = ln.decode("utf-8")
        out.append(ln)
    return out


def parse_events(lines: Iterable[Union[str, bytes]], format: str = "jsonl") -> EventStream:
    """Parse event records into an ordered :class:`EventStream`.

    Parameters
    ----------
    lines : iterable of str or bytes
        JSON-lines records, or CSV rows starting with a header row.
    format : {"jsonl", "csv"}

    Raises
    ------
    ParseError
        On a malformed record; the message names the line and field.
    """
    text_lines = _as_text_lines(lines)
    events = []
    if format == "jsonl":
        for i, raw in enumerate(text_lines, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(i, None, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise ParseError(i, None, "record is not an object")
            events.append(_record_to_event(rec, i, csv_mode=False))
    elif format == "csv":
        reader = csv.reader(text_lines)
        try:
            header = next(reader)
        except StopIteration:
            return EventStream(())
        for name in header:
            if name not in FIELDS:
                raise ParseError(1, name, "unknown column")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(line, None, f"expected {len(header)} columns, got {len(row)}")
            events.append(_record_to_event(dict(zip(header, row)), line, csv_mode=True))
    else:
        raise ValueError(f"unsupported format {format!r}; expected 'jsonl' or 'csv'")
    return EventStream.from_events(events)


def _ts_out(ts: float):
    return int(ts) if float(ts).is_integer() else ts


def _event_record(e: TweetEvent) -> dict:
    return {
        "event_id": e.event_id,
        "timestamp": _ts_out(e.timestamp),
        "user_id": e.user_id,
        "follower_count": e.follower_count,
        "text": e.text,
        "hashtags": sorted(e.hashtags),
        "retweet_of": e.retweet_of,
        "reply_to": e.reply_to,
    }


def serialize_events(stream: Iterable[TweetEvent], format: str = "jsonl") -> str:
    """Render events in the given external format (inverse of :func:`parse_events`)."""
    if format == "jsonl":
        return "".join(json.dumps(_event_record(e), ensure_ascii=False) + "\n" for e in stream)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        # minimal quoting only watches the line terminator, so a bare CR would split the row
        quoted = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_ALL)
        writer.writerow(FIELDS)
        for e in stream:
            rec = _event_record(e)
            rec["hashtags"] = ";".join(rec["hashtags"])
            row = ["" if rec[k] is None else rec[k] for k in FIELDS]
            (quoted if any("\r" in str(v) for v in row) else writer).writerow(row)
        return buf.getvalue()
    raise ValueError(f"unsupported format {format!r}; expected 'jsonl' or 'csv'")


def _format_for(path: Path, format: Optional[str]) -> str:
    if format:
        return format
    return "csv" if path.suffix.lower() == ".csv" else "jsonl"


def read_events(path: Union[str, Path], format: Optional[str] = None) -> EventStream:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        return parse_events(fh, _format_for(path, format))


def write_events(stream: Iterable[TweetEvent], dest: Union[str, Path, IO[str]], format: Optional[str] = None) -> None:
    if hasattr(dest, "write"):
        dest.write(serialize_events(stream, format or "jsonl"))
        return
    path = Path(dest)
    path.write_text(serialize_events(stream, _format_for(path, format)), encoding="utf-8")


def merge_streams(streams: Iterable[EventStream]) -> EventStream:
    return EventStream.from_events(e for s in streams for e in s)


# -- validation ----------------------------------------------------------------


def validate_stream(stream: EventStream) -> StreamStats:
    """Check cross-record invariants and return summary counts.

    Raises
    ------
    StreamError
        Duplicate event ids, unordered timestamps, self-references, or a
        retweet pointing at an event that is timestamped later.
    """
    seen: dict = {}
    users = set()
    n_rt = n_rp = 0
    prev = None
    for e in stream:
        key = (e.timestamp, e.event_id)
        if prev is not None and key < prev:
            raise StreamError(f"events out of order at {e.event_id!r}")
        prev = key
        if e.event_id in seen:
            raise StreamError(f"duplicate event_id {e.event_id!r}")
        seen[e.event_id] = e.timestamp
        users.add(e.user_id)
        if e.retweet_of is not None:
            if e.retweet_of == e.event_id:
                raise StreamError(f"event {e.event_id!r} retweets itself")
            n_rt += 1
        elif e.reply_to is not None:
            if e.reply_to == e.event_id:
                raise StreamError(f"event {e.event_id!r} replies to itself")
            n_rp += 1
    # forward references are only detectable after all ids are known
    for e in stream:
        if e.retweet_of is not None and e.retweet_of in seen and seen[e.retweet_of] > e.timestamp:
            raise StreamError(f"event {e.event_id!r} retweets later event {e.retweet_of!r}")
    return StreamStats(
        event_count=len(stream),
        unique_users=len(users),
        time_span=stream.span,
        retweet_count=n_rt,
        reply_count=n_rp,
    )
