"""Trace records shared by all solvers, with strict CSV round-tripping."""

from __future__ import annotations

import csv
from dataclasses import dataclass

SCHEMA_VERSION = 1
TRACE_COLUMNS = ("schema_version", "iteration", "wall_seconds", "objective",
                 "test_loss", "accuracy", "feasibility_gap", "max_dual_norm")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    wall_seconds: float
    objective: float
    test_loss: float
    accuracy: float
    feasibility_gap: float
    max_dual_norm: float


def write_trace_csv(path, records) -> None:
    # repr keeps the shortest digits that round-trip, so files are
    # byte-stable across identical runs
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow([SCHEMA_VERSION, r.iteration, repr(float(r.wall_seconds)),
                             repr(float(r.objective)), repr(float(r.test_loss)),
                             repr(float(r.accuracy)), repr(float(r.feasibility_gap)),
                             repr(float(r.max_dual_norm))])


def read_trace_csv(path) -> list[TraceRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header in {path}")
        for row in reader:
            if len(row) != len(TRACE_COLUMNS):
                raise ValueError(f"malformed trace row in {path}: {row!r}")
            if int(row[0]) != SCHEMA_VERSION:
                raise ValueError(f"unsupported trace schema version {row[0]}")
            records.append(TraceRecord(int(row[1]), *(float(v) for v in row[2:])))
    return records
