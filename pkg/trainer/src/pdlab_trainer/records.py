"""Reader for the line-delimited trajectory record format.

This package talks to the solver side only through its file formats, so the
schema is parsed here directly: one JSON object per line with an instance
(weights + subsets), the recorded algorithm trajectory (x, r, delta, Delta
per timestep), an optional exact optimum, and a split tag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RECORD_SCHEMA = "pdlab-record-v1"


@dataclass
class TrainRecord:
    instance_id: str
    task: str
    n_elements: int
    weights: np.ndarray
    sets: list[tuple[int, ...]]
    split: str
    uniform: bool
    x: np.ndarray        # (K, n) cumulative inclusion flags
    r: np.ndarray        # (K, n) residuals
    delta: np.ndarray    # (K, m) per-subset increments
    Delta: np.ndarray | None  # (K,) uniform increments, None without the rule
    algo_chosen: tuple[int, ...]
    algo_weight: float
    optimal_x: np.ndarray | None  # (n,) 0/1 labels
    optimal_weight: float | None
    meta: dict

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    @property
    def n_steps(self) -> int:
        return self.x.shape[0]


def _parse_record(payload: dict) -> TrainRecord:
    if payload.get("schema") != RECORD_SCHEMA:
        raise ValueError(f"unsupported schema {payload.get('schema')!r}")
    inst = payload["instance"]
    traj = payload["trajectory"]
    weights = np.asarray(inst["weights"], dtype=np.float64)
    steps = traj["steps"]

    # The engine records a step-0 pre-pass only when sub-tolerance weights
    # exist; supervision starts after it.
    offset = 1 if steps and bool((weights <= 1e-9).any()) else 0
    used = steps[offset:]

    uniform = bool(traj["config"]["uniform"])
    x = np.asarray([s["x"] for s in used], dtype=np.float32)
    r = np.asarray([s["r"] for s in used], dtype=np.float32)
    delta = np.asarray([s["delta"] for s in used], dtype=np.float32)
    if x.size == 0:
        x = np.zeros((0, inst["n_elements"]), dtype=np.float32)
        r = np.zeros((0, inst["n_elements"]), dtype=np.float32)
        delta = np.zeros((0, len(inst["sets"])), dtype=np.float32)
    Delta = None
    if uniform:
        Delta = np.asarray([s["Delta"] or 0.0 for s in used], dtype=np.float32)

    optimal = payload.get("optimal")
    optimal_x = None
    optimal_weight = None
    if optimal is not None:
        optimal_x = np.zeros(inst["n_elements"], dtype=np.float32)
        optimal_x[list(optimal["chosen"])] = 1.0
        optimal_weight = float(optimal["weight"])

    return TrainRecord(
        instance_id=inst["id"],
        task=inst["task"],
        n_elements=inst["n_elements"],
        weights=weights,
        sets=[tuple(t) for t in inst["sets"]],
        split=payload["split"],
        uniform=uniform,
        x=x,
        r=r,
        delta=delta,
        Delta=Delta,
        algo_chosen=tuple(traj["final"]["chosen"]),
        algo_weight=float(traj["final"]["weight"]),
        optimal_x=optimal_x,
        optimal_weight=optimal_weight,
        meta=dict(inst.get("meta", {})),
    )


def read_records(path) -> list[TrainRecord]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(_parse_record(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_dataset_dir(path) -> list[TrainRecord]:
    """All records files of a dataset directory, in sorted filename order."""
    path = Path(path)
    files = sorted(path.glob("*.jsonl"))
    if not files:
        raise FileNotFoundError(f"no .jsonl records under {path}")
    records: list[TrainRecord] = []
    for f in files:
        records.extend(read_records(f))
    return records
