"""Parsing and normalization of raw visit logs.

Input is a flat CSV file with the header
``user_id,timestamp,url,domain,category,active_seconds`` (rows in any
order), or a JSON-lines file carrying the same six fields per record.
Events are grouped per user and sorted by start time. Overlapping visits
within one user are rejected.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

REQUIRED_COLUMNS = ("user_id", "timestamp", "url", "domain", "category", "active_seconds")
JSONL_SUFFIXES = (".jsonl", ".ndjson")


class IngestError(ValueError):
    """Raised for malformed input. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class OverlapError(IngestError):
    def __init__(self, user_id: str, first_start: int, second_start: int, source: str | None = None):
        self.user_id = user_id
        self.first_start = first_start
        self.second_start = second_start
        super().__init__(
            f"overlapping visits for user {user_id!r}: visit at {first_start} "
            f"is still active when visit at {second_start} starts",
            source=source,
        )


class SpatialResolution(enum.Enum):
    URL = "url"
    DOMAIN = "domain"
    CATEGORY = "category"

    @classmethod
    def parse(cls, value: "str | SpatialResolution") -> "SpatialResolution":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown spatial resolution {value!r}; expected url, domain or category") from None


@dataclass(frozen=True, order=True)
class VisitEvent:
    """One visit. Field order doubles as the canonical sort key."""

    start_time: int
    active_seconds: int
    url: str
    domain: str
    category: str
    user_id: str

    @property
    def end_time(self) -> int:
        return self.start_time + self.active_seconds

    def location(self, res: SpatialResolution) -> str:
        if res is SpatialResolution.URL:
            return self.url
        if res is SpatialResolution.DOMAIN:
            return self.domain
        return self.category


class SymbolTable:
    """Dense bijection between location strings and ids ``0..N-1``.

    One table serves one (user, resolution) pair.
    """

    def __init__(self, user_id: str | None = None, resolution: SpatialResolution | None = None):
        self.user_id = user_id
        self.resolution = resolution
        self._ids: dict[str, int] = {}
        self._labels: list[str] = []

    def resolve(self, location: str) -> int:
        sid = self._ids.get(location)
        if sid is None:
            sid = len(self._labels)
            self._ids[location] = sid
            self._labels.append(location)
        return sid

    def label(self, sid: int) -> str:
        return self._labels[sid]

    def id_of(self, location: str) -> int:
        return self._ids[location]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, location: object) -> bool:
        return location in self._ids


def resolve_location(event: VisitEvent, res: SpatialResolution, table: SymbolTable) -> int:
    """Symbol id of ``event`` at resolution ``res``, allocating if new."""
    if table.user_id is not None and table.user_id != event.user_id:
        raise ValueError(f"symbol table belongs to user {table.user_id!r}, not {event.user_id!r}")
    if table.resolution is not None and table.resolution is not res:
        raise ValueError(f"symbol table is for {table.resolution.value} resolution, not {res.value}")
    return table.resolve(event.location(res))


def _parse_int(raw: object, column: str, line: int, source: str | None) -> int:
    if isinstance(raw, bool):
        raise IngestError(f"column {column!r}: expected an integer, got {raw!r}", line, source)
    if isinstance(raw, int):
        return raw
    text = str(raw).strip() if raw is not None else ""
    try:
        return int(text)
    except ValueError:
        raise IngestError(f"column {column!r}: expected an integer, got {raw!r}", line, source) from None


def _make_event(record: dict, line: int, source: str | None) -> VisitEvent:
    values = {}
    for column in ("user_id", "url", "domain", "category"):
        raw = record.get(column)
        text = "" if raw is None else str(raw).strip()
        if not text:
            raise IngestError(f"column {column!r} is empty", line, source)
        values[column] = text
    start = _parse_int(record.get("timestamp"), "timestamp", line, source)
    active = _parse_int(record.get("active_seconds"), "active_seconds", line, source)
    if active < 0:
        raise IngestError(f"column 'active_seconds' must be non-negative, got {active}", line, source)
    return VisitEvent(start_time=start, active_seconds=active, **values)


def _csv_records(text_stream: IO[str], source: str | None) -> Iterator[tuple[int, dict]]:
    reader = csv.reader(text_stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("missing header row", 1, source) from None
    header = [h.strip() for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise IngestError(f"header lacks required columns: {', '.join(missing)}", 1, source)
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise IngestError(f"expected {len(header)} fields, got {len(row)}", line, source)
        yield line, dict(zip(header, row))


def _jsonl_records(text_stream: IO[str], source: str | None) -> Iterator[tuple[int, dict]]:
    for line, raw in enumerate(text_stream, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise IngestError(f"invalid JSON record: {exc.msg}", line, source) from None
        if not isinstance(record, dict):
            raise IngestError("record is not a JSON object", line, source)
        missing = [c for c in REQUIRED_COLUMNS if c not in record]
        if missing:
            raise IngestError(f"record lacks required fields: {', '.join(missing)}", line, source)
        yield line, record


def group_events(events: Iterable[VisitEvent], source: str | None = None) -> dict[str, list[VisitEvent]]:
    """Group by user, sort each stream and reject overlaps. Keys come out sorted."""
    grouped: dict[str, list[VisitEvent]] = {}
    for ev in events:
        grouped.setdefault(ev.user_id, []).append(ev)
    out = {}
    for user in sorted(grouped):
        stream = sorted(grouped[user])
        for prev, cur in zip(stream, stream[1:]):
            if cur.start_time < prev.end_time:
                raise OverlapError(user, prev.start_time, cur.start_time, source)
        out[user] = stream
    return out


def parse_events(byte_stream: IO[bytes] | bytes, fmt: str = "csv", source: str | None = None) -> dict[str, list[VisitEvent]]:
    """Parse a visit log into ``{user_id: [VisitEvent, ...]}``.

    ``fmt`` is ``"csv"`` or ``"jsonl"``. Zero-duration visits are kept.
    """
    if isinstance(byte_stream, (bytes, bytearray)):
        byte_stream = io.BytesIO(byte_stream)
    text = io.TextIOWrapper(byte_stream, encoding="utf-8-sig", newline="")
    if fmt == "csv":
        records = _csv_records(text, source)
    elif fmt == "jsonl":
        records = _jsonl_records(text, source)
    else:
        raise ValueError(f"unknown input format {fmt!r}")
    try:
        events = [_make_event(record, line, source) for line, record in records]
    except UnicodeDecodeError as exc:
        raise IngestError(f"input is not valid UTF-8 ({exc.reason})", source=source) from None
    finally:
        text.detach()
    return group_events(events, source)


def read_events(path: str | Path) -> dict[str, list[VisitEvent]]:
    """Parse a file, picking the format from its extension."""
    path = Path(path)
    fmt = "jsonl" if path.suffix.lower() in JSONL_SUFFIXES else "csv"
    with open(path, "rb") as fh:
        return parse_events(fh, fmt=fmt, source=str(path))


def write_events(events: Iterable[VisitEvent], stream: IO[str]) -> None:
    """Write events in the ingest CSV format."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS)
    for ev in events:
        writer.writerow([ev.user_id, ev.start_time, ev.url, ev.domain, ev.category, ev.active_seconds])
