"""Shared builders for the test suite."""

import json

import pytest

from crisis_netkit.ingest import EventRecord, Kind

START = 1_577_836_800  # 2020-01-01T00:00:00Z


def ev(
    event_id,
    user_id,
    kind,
    ts,
    target=None,
    target_event=None,
    loc=None,
    text=None,
):
    """Terse EventRecord builder; kind accepts the enum or its string value."""
    if isinstance(kind, str):
        kind = Kind(kind)
    return EventRecord(
        event_id=event_id,
        user_id=user_id,
        kind=kind,
        timestamp=ts,
        target_user_id=target,
        target_event_id=target_event,
        profile_location=loc,
        text=text,
    )


def jsonl_lines(rows):
    return "\n".join(json.dumps(r) for r in rows) + "\n"


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(rows, name="events.jsonl"):
        path = tmp_path / name
        path.write_text(jsonl_lines(rows), encoding="utf-8")
        return str(path)

    return _write
