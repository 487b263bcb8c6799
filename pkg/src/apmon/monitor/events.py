"""Primitive events and the tab-separated event log.

One record per line::

    timestamp_s <TAB> event_type <TAB> correlation_id <TAB> key=value,...
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Mapping, Tuple, Union

Scalar = Union[float, int, str]


class EventLogError(ValueError):
    pass


@dataclass(frozen=True)
class EventRecord:
    timestamp: float
    event_type: str
    correlation_id: str = ""
    attributes: Tuple[Tuple[str, Scalar], ...] = ()

    def __post_init__(self):
        if not self.timestamp >= 0:
            raise ValueError(f"event timestamp must be >= 0, got {self.timestamp}")
        if not self.event_type:
            raise ValueError("event type must be nonempty")

    def get(self, key: str, default=None):
        for k, v in self.attributes:
            if k == key:
                return v
        return default


def make_event(timestamp: float, event_type: str, correlation_id: str = "",
               attributes: Mapping[str, Scalar] | None = None) -> EventRecord:
    return EventRecord(float(timestamp), event_type, correlation_id, tuple((attributes or {}).items()))


def _fmt_scalar(v: Scalar) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_scalar(s: str) -> Scalar:
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def format_event(e: EventRecord) -> str:
    attrs = ",".join(f"{k}={_fmt_scalar(v)}" for k, v in e.attributes)
    return f"{e.timestamp!r}\t{e.event_type}\t{e.correlation_id}\t{attrs}"


def parse_event(line: str, lineno: int = 0) -> EventRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) == 3:
        parts.append("")
    if len(parts) != 4:
        raise EventLogError(f"line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
    ts, etype, cid, raw = parts
    attrs = []
    if raw:
        for item in raw.split(","):
            k, sep, v = item.partition("=")
            if not sep or not k:
                raise EventLogError(f"line {lineno}: malformed attribute '{item}'")
            attrs.append((k, _parse_scalar(v)))
    try:
        return EventRecord(float(ts), etype, cid, tuple(attrs))
    except ValueError as exc:
        raise EventLogError(f"line {lineno}: {exc}") from None


def iter_log(lines: Iterable[str]) -> Iterator[EventRecord]:
    for i, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        yield parse_event(line, i)


def read_log(path) -> List[EventRecord]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_log(fh))


def write_log(events: Iterable[EventRecord], path) -> None:
    Path(path).write_text("".join(format_event(e) + "\n" for e in events), encoding="utf-8")


def dumps_log(events: Iterable[EventRecord]) -> str:
    return "".join(format_event(e) + "\n" for e in events)
