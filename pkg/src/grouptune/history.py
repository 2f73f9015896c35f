"""Append-only session history (one JSON object per line)."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .evaluation import Measurement

log = logging.getLogger(__name__)

HISTORY_FILE = "history.jsonl"


class HistoryError(RuntimeError):
    pass


@dataclass(frozen=True)
class HistoryRecord:
    iteration: int
    phase: str  # "init" | "anneal"
    algorithm: str
    mutated_group: int | None
    bits: str  # combination in table bit order
    measurement: Measurement
    accepted: bool
    temperature: float | None = None
    timestamp: float | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "phase": self.phase,
            "algorithm": self.algorithm,
            "mutated_group": self.mutated_group,
            "bits": self.bits,
            "measurement": self.measurement.to_dict(),
            "accepted": self.accepted,
            "temperature": self.temperature,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryRecord":
        return cls(
            iteration=d["iteration"],
            phase=d["phase"],
            algorithm=d["algorithm"],
            mutated_group=d["mutated_group"],
            bits=d["bits"],
            measurement=Measurement.from_dict(d["measurement"]),
            accepted=d["accepted"],
            temperature=d.get("temperature"),
            timestamp=d.get("timestamp"),
        )


def _line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


class MemoryHistory:
    """In-memory sink with the same ordering contract as :class:`JsonlHistory`."""

    def __init__(self):
        self.records: list[HistoryRecord] = []

    def append(self, rec: HistoryRecord) -> None:
        expected = len(self.records)
        if rec.iteration != expected:
            raise HistoryError(f"record iteration {rec.iteration}, expected {expected}")
        self.records.append(rec)


class JsonlHistory:
    """Writes ``history.jsonl``: a header line, then one record per line, flushed per write."""

    def __init__(self, path, header: dict, width: int | None = None):
        self.path = Path(path)
        self.width = width
        self.records: list[HistoryRecord] = []
        self._fh = open(self.path, "w", encoding="utf-8")
        self._write({"type": "header", **header})

    def _write(self, obj) -> None:
        self._fh.write(_line(obj))
        self._fh.flush()

    def append(self, rec: HistoryRecord) -> None:
        expected = len(self.records)
        if rec.iteration != expected:
            raise HistoryError(f"record iteration {rec.iteration}, expected {expected}")
        if self.width is not None and len(rec.bits) != self.width:
            raise HistoryError(f"bitstring length {len(rec.bits)} != space size {self.width}")
        self._write({"type": "record", **rec.to_dict()})
        self.records.append(rec)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_history(path) -> tuple[dict, list[HistoryRecord]]:
    """Read a history file. A truncated final line is dropped with a warning."""
    path = Path(path)
    if path.is_dir():
        path = path / HISTORY_FILE
    if not path.exists():
        raise HistoryError(f"no history at {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise HistoryError(f"{path} is empty")
    parsed = []
    for n, line in enumerate(lines):
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError:
            if n == len(lines) - 1 and n > 0:
                log.warning("%s: dropping truncated last line %d", path, n + 1)
                break
            raise HistoryError(f"{path}: corrupt line {n + 1}") from None
    header = parsed[0]
    if header.get("type") != "header":
        raise HistoryError(f"{path}: first line is not a header")
    records = []
    for obj in parsed[1:]:
        rec = HistoryRecord.from_dict({k: v for k, v in obj.items() if k != "type"})
        if rec.iteration != len(records):
            raise HistoryError(f"{path}: iteration {rec.iteration} out of order")
        records.append(rec)
    return header, records
