"""JSONL event logs: one envelope or state change per line, revision-stamped.

A recorded run is fully reconstructable from its log: a header line with
the scenario configuration and the boot snapshot, control lines for
session lifecycle, one line per inbound envelope (with its dispatch
outcome), one diff line per revision, task/game bookkeeping lines, and a
final line with the closing snapshot.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List

from .messages import canonical_json

LINE_HEADER = "header"
LINE_CTL = "ctl"
LINE_ENV = "env"
LINE_DIFF = "diff"
LINE_TASK = "task"
LINE_GAME = "game"
LINE_FINAL = "final"


class LogCorrupt(Exception):
    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EventLog:
    """In-memory record buffer that can be flushed to a JSONL file."""

    def __init__(self) -> None:
        self.records: List[dict] = []

    def append(self, record: dict) -> None:
        self.records.append(record)

    def dump(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for record in self.records:
                fh.write(canonical_json(record))
                fh.write("\n")

    def dumps(self) -> str:
        return "".join(canonical_json(r) + "\n" for r in self.records)


def read_log(path: Path | str) -> List[dict]:
    """Load a JSONL log, checking shape; corrupt lines carry their number."""
    records = []
    text = Path(path).read_text(encoding="utf-8")
    return parse_log(text.splitlines())


def parse_log(lines: Iterable[str]) -> List[dict]:
    records: List[dict] = []
    line_no = 0
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise LogCorrupt(f"invalid JSON: {e.msg}", line_no) from e
        if not isinstance(record, dict) or "line" not in record:
            raise LogCorrupt("record must be an object with a 'line' field", line_no)
        records.append(record)
    if not records:
        raise LogCorrupt("empty log", max(line_no, 1))
    if records[0].get("line") != LINE_HEADER:
        raise LogCorrupt("log must start with a header line", 1)
    if records[-1].get("line") != LINE_FINAL:
        raise LogCorrupt("log truncated: missing final line", line_no)
    return records
