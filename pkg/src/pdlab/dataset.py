"""Dataset construction and the on-disk formats.

Records are line-delimited JSON with an explicit schema version; floats go
through Python's shortest round-trip repr so read(write(x)) is bit-exact.
A dataset directory holds one records file per (task, family, size, split)
plus a manifest with the generation parameters and content digests — no
timestamps, so regeneration from the same seed is byte-identical.

Model weights use a small text format: a config header followed by named
tensors with explicit shapes, one row per line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import (
    AlgoConfig,
    StepRecord,
    Trajectory,
    run_cover_msc,
    run_cover_mvc,
    run_general,
)
from .graphs import gen_3con_planar, gen_ba, gen_ba_bipartite, gen_er, gen_lobster, gen_star, sample_weights
from .instances import (
    HittingSetInstance,
    Solution,
    from_set_cover,
    from_vertex_cover,
    is_hitting_set,
    make_instance,
)
from .neural import ModelWeights, tensor_shapes
from .oracle import OptimalSolution, solve_optimal

__all__ = [
    "RECORD_SCHEMA",
    "WEIGHTS_SCHEMA",
    "DatasetRecord",
    "ParseError",
    "build_dataset",
    "write_records",
    "read_records",
    "write_dataset",
    "replay_verify",
    "save_weights",
    "load_weights",
]

RECORD_SCHEMA = "pdlab-record-v1"
WEIGHTS_SCHEMA = "pdlab-weights v1"

ORACLE_SIZE_CAP = 64
DEFAULT_EPSILON = 0.1
SPLITS = ("train", "val", "test")


class ParseError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class DatasetRecord:
    instance: HittingSetInstance
    trajectory: Trajectory
    optimal: OptimalSolution | None
    split: str

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


# ---------------------------------------------------------------------------
# JSON codecs


def _instance_to_dict(inst: HittingSetInstance) -> dict:
    return {
        "id": inst.id,
        "task": inst.task,
        "n_elements": inst.n_elements,
        "weights": list(inst.weights),
        "sets": [list(t) for t in inst.sets],
        "meta": dict(inst.meta),
    }


def _instance_from_dict(d: dict) -> HittingSetInstance:
    inst = make_instance(
        d["task"], d["weights"], d["sets"], id=d["id"], meta=d.get("meta", {})
    )
    if inst.n_elements != d["n_elements"]:
        raise ValueError("n_elements does not match weights length")
    return inst


def _trajectory_to_dict(traj: Trajectory) -> dict:
    cfg = traj.config
    return {
        "algo": traj.algo,
        "config": {
            "uniform": cfg.uniform,
            "epsilon": cfg.epsilon,
            "tight_tol": cfg.tight_tol,
            "max_steps": cfg.max_steps,
        },
        "steps": [
            {
                "x": np.asarray(s.x, dtype=int).tolist(),
                "r": np.asarray(s.r, dtype=float).tolist(),
                "delta": np.asarray(s.delta, dtype=float).tolist(),
                "Delta": s.Delta,
            }
            for s in traj.steps
        ],
        "final": {
            "chosen": list(traj.final_solution.chosen),
            "weight": traj.final_solution.weight,
        },
    }


def _trajectory_from_dict(d: dict, instance_id: str) -> Trajectory:
    cfg = AlgoConfig(**d["config"])
    steps = tuple(
        StepRecord(
            x=np.asarray(s["x"], dtype=np.int8),
            r=np.asarray(s["r"], dtype=np.float64),
            delta=np.asarray(s["delta"], dtype=np.float64),
            Delta=s["Delta"],
        )
        for s in d["steps"]
    )
    final = Solution(chosen=tuple(d["final"]["chosen"]), weight=d["final"]["weight"])
    return Trajectory(
        instance_id=instance_id,
        algo=d["algo"],
        config=cfg,
        steps=steps,
        final_solution=final,
    )


def _optimal_to_dict(opt: OptimalSolution | None) -> dict | None:
    if opt is None:
        return None
    return {
        "chosen": list(opt.chosen),
        "weight": opt.weight,
        "status": opt.status,
        "nodes_explored": opt.nodes_explored,
    }


def _optimal_from_dict(d: dict | None) -> OptimalSolution | None:
    if d is None:
        return None
    return OptimalSolution(
        chosen=tuple(d["chosen"]),
        weight=d["weight"],
        status=d["status"],
        nodes_explored=d["nodes_explored"],
    )


def record_to_json(record: DatasetRecord) -> str:
    payload = {
        "schema": RECORD_SCHEMA,
        "split": record.split,
        "instance": _instance_to_dict(record.instance),
        "trajectory": _trajectory_to_dict(record.trajectory),
        "optimal": _optimal_to_dict(record.optimal),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def record_from_json(line: str) -> DatasetRecord:
    d = json.loads(line)
    if d.get("schema") != RECORD_SCHEMA:
        raise ValueError(f"unsupported schema {d.get('schema')!r}")
    instance = _instance_from_dict(d["instance"])
    return DatasetRecord(
        instance=instance,
        trajectory=_trajectory_from_dict(d["trajectory"], instance.id),
        optimal=_optimal_from_dict(d["optimal"]),
        split=d["split"],
    )


def write_records(path, records: Iterable[DatasetRecord]) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record_to_json(record))
            fh.write("\n")
            count += 1
    return count


def read_records(path) -> list[DatasetRecord]:
    path = Path(path)
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(record_from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(path, lineno, str(exc)) from exc
    return out


# ---------------------------------------------------------------------------
# Dataset generation


def _record_seed(seed: int, index: int, stream: int, attempt: int = 0):
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(index, stream, attempt))


def _build_instance(task, family, size, seed, index, params) -> HittingSetInstance:
    weights = sample_weights(size, _record_seed(seed, index, 1)).tolist()
    meta = {
        "family": family,
        "size": size,
        "seed": int(seed),
        "index": index,
        **params,
    }
    rid = f"{task}-{family}-n{size}-s{seed}-{index:05d}"
    if task == "mvc":
        graph = _gen_mvc_graph(family, size, seed, index, params)
        return from_vertex_cover(graph.n, graph.edges, weights, id=rid, meta=meta)
    if family != "ba_bipartite":
        raise ValueError(f"task {task!r} requires the ba_bipartite family")
    b = int(params.get("b", 5))
    bip = gen_ba_bipartite(size, size, b, _record_seed(seed, index, 0))
    if task == "mhs":
        return make_instance("mhs", weights, bip.rhs_neighbors, id=rid, meta=meta)
    covers = [[] for _ in range(size)]
    for j, nbrs in enumerate(bip.rhs_neighbors):
        for l in nbrs:
            covers[l].append(j)
    return from_set_cover(bip.n_rhs, covers, weights, id=rid, meta=meta)


def _gen_mvc_graph(family, size, seed, index, params):
    key = _record_seed(seed, index, 0)
    if family == "ba":
        return gen_ba(size, int(params.get("attach_lo", 1)), int(params.get("attach_hi", min(10, size - 1))), key)
    if family == "er":
        return gen_er(size, float(params.get("p_lo", 0.2)), float(params.get("p_hi", 0.8)), key)
    if family == "star":
        return gen_star(size, key)
    if family == "lobster":
        return gen_lobster(size, key)
    if family == "triconn_planar":
        for attempt in range(1000):
            g = gen_3con_planar(size, _record_seed(seed, index, 0, attempt))
            if g is not None:
                return g
        raise RuntimeError(f"no 3-connected planar graph found for n={size}")
    raise ValueError(f"unknown family {family!r} for mvc")


def solve_for_task(instance: HittingSetInstance, epsilon: float = DEFAULT_EPSILON) -> Trajectory:
    """The benchmark algorithm for each task: the relaxed cover variant for
    vertex/set cover, the uniform-increase general scheme for hitting set."""
    if instance.task == "mvc":
        return run_cover_mvc(instance, epsilon)
    if instance.task == "msc":
        return run_cover_msc(instance, epsilon)
    return run_general(instance, AlgoConfig(uniform=True))


def build_dataset(
    task: str,
    family: str,
    size: int,
    count: int,
    seed: int,
    with_optimal: bool = False,
    epsilon: float = DEFAULT_EPSILON,
    split: str = "auto",
    oracle_budget_ms: float = 10_000.0,
    params: dict | None = None,
) -> list[DatasetRecord]:
    """Generate ``count`` records for one (task, family, size) cell.

    split="auto" assigns the first 90% to train and the rest to val.
    Optimal labels require size within the oracle budget cap; a timeout is
    recorded in the label status, not raised.
    """
    if task not in ("mvc", "msc", "mhs"):
        raise ValueError(f"unknown task {task!r}")
    if split not in SPLITS and split != "auto":
        raise ValueError(f"unknown split {split!r}")
    if with_optimal and size > ORACLE_SIZE_CAP:
        raise ValueError(
            f"optimal labels supported up to {ORACLE_SIZE_CAP} elements, got {size}"
        )
    params = dict(params or {})
    params["epsilon"] = epsilon
    records = []
    train_cut = int(count * 0.9)
    for i in range(count):
        inst = _build_instance(task, family, size, seed, i, params)
        traj = solve_for_task(inst, epsilon)
        opt = solve_optimal(inst, oracle_budget_ms) if with_optimal else None
        if split == "auto":
            rec_split = "train" if i < train_cut else "val"
        else:
            rec_split = split
        records.append(DatasetRecord(instance=inst, trajectory=traj, optimal=opt, split=rec_split))
    return records


def write_dataset(out_dir, records: Sequence[DatasetRecord], name: str, params: dict) -> Path:
    """Write one records file plus the manifest (created or updated)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    filename = f"{name}.jsonl"
    path = out_dir / filename
    write_records(path, records)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()

    manifest_path = out_dir / "manifest.json"
    manifest = {"schema": "pdlab-manifest-v1", "files": {}}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    manifest["files"][filename] = {
        "sha256": digest,
        "count": len(records),
        "params": params,
        "split_policy": "90/10 train/val" if params.get("split") == "auto" else params.get("split"),
    }
    manifest["files"] = dict(sorted(manifest["files"].items()))
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def replay_verify(record: DatasetRecord, tol: float = 1e-9) -> bool:
    """Re-run the recorded algorithm and compare trajectories field-wise."""
    traj = record.trajectory
    if traj.algo == "cover-mvc":
        fresh = run_cover_mvc(record.instance, traj.config.epsilon)
    elif traj.algo == "cover-msc":
        fresh = run_cover_msc(record.instance, traj.config.epsilon)
    else:
        fresh = run_general(record.instance, traj.config)
    if len(fresh.steps) != len(traj.steps):
        return False
    if fresh.final_solution.chosen != traj.final_solution.chosen:
        return False
    if abs(fresh.final_solution.weight - traj.final_solution.weight) > tol:
        return False
    if record.optimal is not None:
        if not is_hitting_set(record.instance, record.optimal.chosen):
            return False
        if record.optimal.weight > traj.final_solution.weight + tol:
            return False
    return all(a.allclose(b, tol) for a, b in zip(fresh.steps, traj.steps))


# ---------------------------------------------------------------------------
# Weights file format


def save_weights(path, weights: ModelWeights) -> None:
    path = Path(path)
    lines = [
        WEIGHTS_SCHEMA,
        f"hidden_dim {weights.hidden_dim}",
        f"uniform {'true' if weights.uniform else 'false'}",
        f"activation {weights.activation}",
        f"degree_transform {weights.degree_transform}",
        f"decode_threshold {weights.decode_threshold!r}",
        f"temperature {weights.temperature!r}",
    ]
    for name in tensor_shapes(weights.hidden_dim, weights.uniform):
        tensor = np.asarray(weights.tensors[name], dtype=np.float64)
        dims = " ".join(str(d) for d in tensor.shape)
        lines.append(f"tensor {name} {dims}")
        rows = tensor.reshape(tensor.shape[0], -1) if tensor.ndim > 1 else tensor[None, :]
        for row in rows:
            lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("end")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_weights(path) -> ModelWeights:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != WEIGHTS_SCHEMA:
        raise ParseError(path, 1, f"expected header {WEIGHTS_SCHEMA!r}")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("tensor "):
        if lines[i].strip() and lines[i] != "end":
            key, value = lines[i].split(maxsplit=1)
            header[key] = value
        i += 1
    try:
        hidden_dim = int(header["hidden_dim"])
        uniform = header["uniform"] == "true"
    except KeyError as exc:
        raise ParseError(path, i, f"missing header field {exc}") from exc

    tensors: dict[str, np.ndarray] = {}
    while i < len(lines):
        line = lines[i].strip()
        if not line or line == "end":
            i += 1
            continue
        if not line.startswith("tensor "):
            raise ParseError(path, i + 1, f"expected tensor declaration, got {line!r}")
        parts = line.split()
        name = parts[1]
        shape = tuple(int(d) for d in parts[2:])
        n_rows = shape[0] if len(shape) > 1 else 1
        values = []
        for k in range(n_rows):
            values.append([float(v) for v in lines[i + 1 + k].split()])
        tensors[name] = np.asarray(values, dtype=np.float64).reshape(shape)
        i += 1 + n_rows
    return ModelWeights(
        hidden_dim=hidden_dim,
        uniform=uniform,
        tensors=tensors,
        activation=header.get("activation", "elu"),
        degree_transform=header.get("degree_transform", "log1p"),
        decode_threshold=float(header.get("decode_threshold", "0.5")),
        temperature=float(header.get("temperature", "1.0")),
    )
