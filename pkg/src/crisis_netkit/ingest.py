"""Event-stream parsing, keyword filtering, and daily partitioning.

Events arrive as JSONL or CSV rows describing user activities (posts,
retweets, replies, quotes). Parsing validates each record, skips and counts
malformed rows, and keeps stream order. Filtered events are grouped into
contiguous day buckets anchored at UTC midnight of the study start.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator

from .errors import SchemaError, StudyWindowError

SECONDS_PER_DAY = 86400

# Keys shared by the JSONL and CSV input schemas.
_FIELDS = (
    "event_id",
    "user_id",
    "kind",
    "target_user_id",
    "target_event_id",
    "ts",
    "location",
    "text",
)


class Kind(str, Enum):
    POST = "post"
    RETWEET = "retweet"
    REPLY = "reply"
    QUOTE = "quote"


# Kinds that point at another user and therefore create directed edges.
COMMUNICATION_KINDS = frozenset((Kind.RETWEET, Kind.REPLY, Kind.QUOTE))


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One validated activity event.

    ``timestamp`` is UTC epoch seconds. ``target_user_id`` is present exactly
    when the kind is a communication (retweet, reply, quote); a post never
    carries target fields. Self-directed communication is legal and later
    becomes a self-edge.
    """

    event_id: str
    user_id: str
    kind: Kind
    timestamp: int
    target_user_id: str | None = None
    target_event_id: str | None = None
    profile_location: str | None = None
    text: str | None = None


@dataclass(slots=True)
class ParseStats:
    parsed: int = 0
    valid: int = 0
    malformed: int = 0


@dataclass(slots=True)
class DayBucket:
    """All events of one study day, sorted by timestamp ascending."""

    day_index: int
    events: list[EventRecord] = field(default_factory=list)


def _clean_optional(value) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        value = value.strip()
        return value or None
    return None


def _build_record(raw: dict) -> EventRecord | None:
    """Validate one raw mapping; return None when it breaks the schema."""
    event_id = raw.get("event_id")
    user_id = raw.get("user_id")
    if not isinstance(event_id, str) or not event_id.strip():
        return None
    if not isinstance(user_id, str) or not user_id.strip():
        return None

    kind_raw = raw.get("kind")
    if not isinstance(kind_raw, str):
        return None
    try:
        kind = Kind(kind_raw.strip().lower())
    except ValueError:
        return None

    ts = raw.get("ts")
    # bool is an int subclass; reject it explicitly.
    if isinstance(ts, bool) or not isinstance(ts, int):
        if isinstance(ts, str):
            try:
                ts = int(ts.strip())
            except ValueError:
                return None
        else:
            return None

    target_user = _clean_optional(raw.get("target_user_id"))
    target_event = _clean_optional(raw.get("target_event_id"))

    if kind in COMMUNICATION_KINDS:
        if target_user is None:
            return None
    else:
        # Posts must not reference anyone.
        if target_user is not None or target_event is not None:
            return None

    return EventRecord(
        event_id=event_id.strip(),
        user_id=user_id.strip(),
        kind=kind,
        timestamp=ts,
        target_user_id=target_user,
        target_event_id=target_event,
        profile_location=_clean_optional(raw.get("location")),
        text=raw.get("text") if isinstance(raw.get("text"), str) else None,
    )


def _iter_jsonl(stream: IO[str], stats: ParseStats) -> Iterator[EventRecord]:
    for line in stream:
        line = line.strip()
        if not line:
            continue
        stats.parsed += 1
        try:
            raw = json.loads(line)
        except json.JSONDecodeError:
            stats.malformed += 1
            continue
        if not isinstance(raw, dict):
            stats.malformed += 1
            continue
        record = _build_record(raw)
        if record is None:
            stats.malformed += 1
            continue
        stats.valid += 1
        yield record


def _iter_csv(stream: IO[str], stats: ParseStats) -> Iterator[EventRecord]:
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    missing = [k for k in _FIELDS if k not in header]
    if missing:
        raise SchemaError(f"csv header missing columns: {', '.join(missing)}")
    for row in reader:
        stats.parsed += 1
        raw = {k: (row.get(k) or None) for k in _FIELDS}
        record = _build_record(raw)
        if record is None:
            stats.malformed += 1
            continue
        stats.valid += 1
        yield record


def parse_events(
    stream: IO[str] | IO[bytes] | str,
    fmt: str = "jsonl",
) -> tuple[list[EventRecord], ParseStats]:
    """Parse an event stream, skipping malformed records.

    ``stream`` may be a path or an open text/binary handle. Returns the valid
    records in stream order together with parse counts. Raises SchemaError
    when more than half of the records are malformed; conservation holds:
    parsed == valid + malformed.
    """
    close_after = False
    if isinstance(stream, str):
        stream = open(stream, "r", encoding="utf-8")
        close_after = True
    elif isinstance(stream.read(0), bytes):  # type: ignore[union-attr]
        stream = io.TextIOWrapper(stream, encoding="utf-8")  # type: ignore[arg-type]

    stats = ParseStats()
    try:
        if fmt == "jsonl":
            records = list(_iter_jsonl(stream, stats))  # type: ignore[arg-type]
        elif fmt == "csv":
            records = list(_iter_csv(stream, stats))  # type: ignore[arg-type]
        else:
            raise ValueError(f"unknown format: {fmt!r}")
    finally:
        if close_after:
            stream.close()  # type: ignore[union-attr]

    if stats.parsed and stats.malformed * 2 > stats.parsed:
        raise SchemaError(
            f"{stats.malformed} of {stats.parsed} records malformed; "
            "stream is unusable"
        )
    return records, stats


def filter_by_keywords(
    events: Iterable[EventRecord], keywords: Iterable[str]
) -> list[EventRecord]:
    """Keep events whose text contains any keyword, case-insensitively.

    Events with no text are dropped. The keyword list must be non-empty.
    """
    folded = [k.casefold() for k in keywords if k and k.strip()]
    if not folded:
        raise ValueError("keyword list is empty")
    kept = []
    for ev in events:
        if ev.text is None:
            continue
        text = ev.text.casefold()
        if any(k in text for k in folded):
            kept.append(ev)
    return kept


def day_index_of(timestamp: int, study_start: int) -> int:
    return (timestamp - study_start) // SECONDS_PER_DAY


def day_partition(
    events: Iterable[EventRecord], study_start: int
) -> list[DayBucket]:
    """Group events into contiguous day buckets from the study start.

    ``study_start`` is a UTC epoch second; day 0 spans the first 86400 s from
    it. Days with no events still appear as empty buckets so bucket indices
    stay contiguous. An event before the start is a fatal range error.
    """
    buckets: list[DayBucket] = []
    for ev in events:
        if ev.timestamp < study_start:
            raise StudyWindowError(
                f"event {ev.event_id} at ts {ev.timestamp} precedes "
                f"study start {study_start}"
            )
        day = day_index_of(ev.timestamp, study_start)
        while len(buckets) <= day:
            buckets.append(DayBucket(day_index=len(buckets)))
        buckets[day].events.append(ev)
    for bucket in buckets:
        bucket.events.sort(key=lambda ev: ev.timestamp)
    return buckets


def write_events_jsonl(events: Iterable[EventRecord], path: str) -> int:
    """Serialize events to JSONL with the input schema keys; returns count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            row = {
                "event_id": ev.event_id,
                "user_id": ev.user_id,
                "kind": ev.kind.value,
                "ts": ev.timestamp,
            }
            if ev.target_user_id is not None:
                row["target_user_id"] = ev.target_user_id
            if ev.target_event_id is not None:
                row["target_event_id"] = ev.target_event_id
            if ev.profile_location is not None:
                row["location"] = ev.profile_location
            if ev.text is not None:
                row["text"] = ev.text
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            n += 1
    return n
