"""Serializable experiment records."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

SCHEMA_VERSION = "report.v1"


def params_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=_jsonable).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)!r}")


def _clean(o):
    # json cannot carry inf/nan; write them as strings
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, np.generic):
        return _clean(o.item())
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


@dataclass
class ExperimentReport:
    experiment: str
    instance: str
    params_hash: str = ""
    seeds: dict = field(default_factory=dict)
    sample_sizes: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    tests: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    curve: list | None = None
    config: dict | None = None
    valid: bool = True
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return self.valid and all(self.verdicts.values())

    def to_dict(self, with_clock: bool = True) -> dict:
        d = _clean(asdict(self))
        d["schema"] = SCHEMA_VERSION
        d["passed"] = self.passed
        d.pop("curve")
        if not with_clock:
            d.pop("wall_clock")
        return d

    def to_json(self, with_clock: bool = True) -> str:
        return json.dumps(self.to_dict(with_clock), sort_keys=True, indent=2)

    def filename(self, seed) -> str:
        return f"{self.experiment}-{self.instance}-{seed}"

    def write(self, out_dir, seed) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        stem = os.path.join(out_dir, self.filename(seed))
        paths = [stem + ".json"]
        with open(paths[0], "w") as fh:
            fh.write(self.to_json())
        if self.curve is not None:
            paths.append(stem + ".csv")
            with open(paths[1], "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "estimate", "lo", "hi"])
                for row in self.curve:
                    w.writerow([repr(float(v)) for v in row])
        return paths
