"""Evaluation histories and their line-delimited JSON form."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Record:
    step: int
    x: list
    value: float          # minimisation sign; nan when infeasible
    feasible: bool
    stage: int = 1

    def to_json(self):
        return json.dumps({"step": self.step, "x": [float(v) for v in self.x],
                           "value": None if not self.feasible else float(self.value),
                           "feasible": bool(self.feasible), "stage": self.stage})


@dataclass
class History:
    records: list = field(default_factory=list)

    def add(self, x, value, feasible, stage=1):
        feasible = bool(feasible) and value is not None and math.isfinite(value)
        rec = Record(len(self.records) + 1, list(np.asarray(x, dtype=np.float64)),
                     float(value) if feasible else math.nan, feasible, stage)
        self.records.append(rec)
        return rec

    def __len__(self):
        return len(self.records)

    @property
    def X(self):
        return np.array([r.x for r in self.records])

    @property
    def values(self):
        return np.array([r.value for r in self.records])

    @property
    def feasible(self):
        return np.array([r.feasible for r in self.records], dtype=bool)

    def best_trace(self):
        """Best-so-far (minimum) feasible value after each evaluation; inf before the first."""
        out, best = [], math.inf
        for r in self.records:
            if r.feasible and r.value < best:
                best = r.value
            out.append(best)
        return np.array(out)

    def best(self):
        feas = [r for r in self.records if r.feasible]
        if not feas:
            return None
        return min(feas, key=lambda r: r.value)

    def extend(self, other, stage=None):
        for r in other.records:
            self.add(r.x, r.value if r.feasible else None, r.feasible, stage or r.stage)

    def to_jsonl(self):
        return "".join(r.to_json() + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text):
        h = cls()
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                h.add(d["x"], d["value"], d["feasible"], d.get("stage", 1))
        return h


def evaluate_safely(objective, x):
    """Call ``objective``; exceptions and non-finite results count as infeasible."""
    try:
        val = objective(np.asarray(x, dtype=np.float64))
    except Exception:  # noqa: BLE001 - any failure of the black box is an infeasible design
        return None, False
    if val is None:
        return None, False
    val = float(val)
    return (val, True) if math.isfinite(val) else (None, False)
