"""Line-delimited JSON history logs."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

EVENTS = ("invoke", "respond", "send", "recv", "crash")


class LogFormatError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


def digest(value: bytes) -> str:
    return hashlib.sha256(value).hexdigest()[:32]


class HistoryLog:
    def __init__(self, records: list[dict] | None = None):
        self.records: list[dict] = records if records is not None else []

    def append(self, vtime: int, node: str, event: str, **fields) -> dict:
        rec = {"vtime": vtime, "node": node, "event": event}
        rec.update({k: v for k, v in fields.items() if v is not None})
        self.records.append(rec)
        return rec

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
                       for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def parse(cls, text: str) -> HistoryLog:
        records = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise LogFormatError(lineno, "record is not an object")
            for key in ("vtime", "node", "event"):
                if key not in rec:
                    raise LogFormatError(lineno, f"missing field {key!r}")
            if rec["event"] not in EVENTS:
                raise LogFormatError(lineno, f"unknown event {rec['event']!r}")
            rec["_line"] = lineno
            records.append(rec)
        return cls(records)

    @classmethod
    def read(cls, path: str | Path) -> HistoryLog:
        return cls.parse(Path(path).read_text())
