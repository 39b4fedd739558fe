"""Run logs as JSON Lines: one header object, then one record per tick."""

from __future__ import annotations

import json

from .engine import LOG_FORMAT, RunLog
from .errors import MalformedLine


def _line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_log(log: RunLog) -> str:
    return "".join(_line(obj) + "\n" for obj in (log.header, *log.records))


def read_log(text: str) -> RunLog:
    lines = text.splitlines()
    if not lines:
        raise MalformedLine(1, "missing header")
    parsed = []
    for number, line in enumerate(lines, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(number, exc.msg) from None
        if not isinstance(obj, dict):
            raise MalformedLine(number, "expected a JSON object")
        parsed.append(obj)
    header, records = parsed[0], parsed[1:]
    if header.get("format") != LOG_FORMAT or "config" not in header:
        raise MalformedLine(1, "not a florasim run-log header")
    for i, rec in enumerate(records):
        if rec.get("tick") != i:
            raise MalformedLine(i + 2, f"expected tick {i}")
    return RunLog(header, tuple(records))
