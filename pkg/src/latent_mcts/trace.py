"""Search traces and their JSON-lines serialization.

A trace file starts with one header object ``{"type": "header", "config":
..., "seed": ...}`` followed by one object per evaluation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import Measurement

RECORD_SCHEMA = {
    "type": "object",
    "required": ["step", "encoding", "metric", "valid", "best_so_far", "unique_valid", "fallback"],
    "additionalProperties": False,
    "properties": {
        "step": {"type": "integer", "minimum": 0},
        "encoding": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "metric": {"type": "number"},
        "valid": {"type": "boolean"},
        "best_so_far": {"type": ["number", "null"]},
        "unique_valid": {"type": "integer", "minimum": 0},
        "fallback": {"type": "boolean"},
    },
}

HEADER_SCHEMA = {
    "type": "object",
    "required": ["type", "config", "seed"],
    "properties": {
        "type": {"const": "header"},
        "config": {"type": "object"},
        "seed": {"type": "integer"},
    },
}


@dataclass
class TraceRecord:
    step: int
    encoding: list
    metric: float
    valid: bool
    best_so_far: Optional[float]
    unique_valid: int
    fallback: bool = False

    def to_dict(self) -> dict:
        return {"step": self.step, "encoding": self.encoding, "metric": self.metric,
                "valid": self.valid, "best_so_far": self.best_so_far,
                "unique_valid": self.unique_valid, "fallback": self.fallback}


@dataclass
class SearchTrace:
    config: dict
    seed: int
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final_tree: Optional[dict] = None

    def record(self, m: Measurement, unique_valid: int, fallback: bool = False) -> TraceRecord:
        best = self.best_so_far
        if m.valid and (best is None or m.metric > best):
            best = m.metric
        rec = TraceRecord(len(self.records), [float(v) for v in m.encoding], float(m.metric),
                          bool(m.valid), best, int(unique_valid), bool(fallback))
        self.records.append(rec)
        return rec

    @property
    def best_so_far(self) -> Optional[float]:
        return self.records[-1].best_so_far if self.records else None

    @property
    def unique_valid(self) -> int:
        return self.records[-1].unique_valid if self.records else 0

    def __len__(self) -> int:
        return len(self.records)

    def valid_records(self) -> list[TraceRecord]:
        return [r for r in self.records if r.valid]

    def best_by_unique(self) -> np.ndarray:
        """Best-so-far after the i-th unique valid sample, for i = 1..U."""
        out = []
        for r in self.records:
            if r.unique_valid > len(out):
                out.append(r.best_so_far)
        return np.array(out, dtype=float)

    def samples_to_reach(self, target: float, tol: float = 1e-9) -> Optional[int]:
        """Unique valid samples consumed when best-so-far first reaches ``target``."""
        for r in self.records:
            if r.best_so_far is not None and r.best_so_far >= target - tol:
                return r.unique_valid
        return None

    def best_at(self, n_unique: int) -> Optional[float]:
        best = None
        for r in self.records:
            if r.unique_valid > n_unique:
                break
            best = r.best_so_far
        return best

    # -- io ---------------------------------------------------------------

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "header", "config": self.config, "seed": self.seed}, sort_keys=True)]
        lines += [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> "SearchTrace":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not lines or lines[0].get("type") != "header":
            raise ValueError("trace is missing its header line")
        trace = cls(lines[0]["config"], lines[0]["seed"])
        trace.records = [TraceRecord(**d) for d in lines[1:]]
        return trace

    @classmethod
    def read(cls, path) -> "SearchTrace":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def validate_trace_lines(text: str) -> None:
    """Validate a JSON-lines trace against the header and record schemas."""
    import jsonschema

    lines = [line for line in text.splitlines() if line.strip()]
    jsonschema.validate(json.loads(lines[0]), HEADER_SCHEMA)
    prev_best = -math.inf
    for line in lines[1:]:
        d = json.loads(line)
        jsonschema.validate(d, RECORD_SCHEMA)
        if d["best_so_far"] is not None:
            if d["best_so_far"] < prev_best:
                raise ValueError(f"best_so_far decreased at step {d['step']}")
            prev_best = d["best_so_far"]
