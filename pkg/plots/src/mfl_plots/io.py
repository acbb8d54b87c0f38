"""Parsers for the documented artifact formats.

Trace CSV: header ``step,tau,G,H,F,wall_ms`` then one row per checkpoint.
Particle snapshot: header ``m d domain period`` then m rows of d floats.
Parse errors name the offending row.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRACE_HEADER = "step,tau,G,H,F,wall_ms"
TRACE_COLUMNS = ("step", "tau", "G", "H", "F", "wall_ms")


@dataclass(frozen=True)
class TraceTable:
    path: str
    steps: np.ndarray
    columns: dict[str, np.ndarray]

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ValueError(f"{self.path}: no column {name!r}")
        return self.columns[name]


def read_trace_csv(path) -> TraceTable:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"{path}: expected header {TRACE_HEADER!r}")
    data = []
    for idx, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"{path}: row {idx} has {len(parts)} fields, expected 6")
        try:
            data.append([float(v) for v in parts])
        except ValueError:
            raise ValueError(f"{path}: row {idx} is not numeric: {line!r}") from None
    if not data:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(data)
    columns = {name: arr[:, i] for i, name in enumerate(TRACE_COLUMNS)}
    return TraceTable(path=str(path), steps=arr[:, 0].astype(int), columns=columns)


@dataclass(frozen=True)
class ParticleCloud:
    positions: np.ndarray  # (m, d)
    domain: str
    period: float


def read_particle_snapshot(path) -> ParticleCloud:
    lines = Path(path).read_text().strip().splitlines()
    head = lines[0].split()
    if len(head) != 4:
        raise ValueError(f"{path}: row 1 is not a particle snapshot header")
    m, d, domain, period = int(head[0]), int(head[1]), head[2], float(head[3])
    rows = []
    for idx, line in enumerate(lines[1 : 1 + m], start=2):
        vals = line.split()
        if len(vals) != d:
            raise ValueError(f"{path}: row {idx} has {len(vals)} values, expected {d}")
        try:
            rows.append([float(v) for v in vals])
        except ValueError:
            raise ValueError(f"{path}: row {idx} is not numeric: {line!r}") from None
    if len(rows) != m:
        raise ValueError(f"{path}: expected {m} particle rows, found {len(rows)}")
    return ParticleCloud(positions=np.array(rows), domain=domain, period=period)
