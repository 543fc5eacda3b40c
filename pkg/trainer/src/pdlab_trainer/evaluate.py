"""Free-run inference and the model-to-algorithm ratio metric.

Inference mirrors the solver side: the model feeds back its own clamped
residual predictions, commits elements by threshold (or one argmax element
per step under the uniform rule), stops once every subset is hit or after
|E| steps, and completes any leftover subsets greedily by residual per
degree.  Ratios are averaged per seed group first, then summarized across
groups, matching the benchmark protocol.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .model import GraphBatch, PrimalDualNet
from .records import TrainRecord


@dataclass
class EvalResult:
    instance_id: str
    chosen: tuple[int, ...]
    weight: float
    feasible_before_cleanup: bool
    cleanup_used: bool
    algo_weight: float
    size: int
    seed_group: object


@torch.no_grad()
def free_run(model: PrimalDualNet, records: list[TrainRecord], max_steps: int | None = None) -> list[EvalResult]:
    model.eval()
    graph = GraphBatch.from_records(records)
    n = graph.n_elements
    dt = next(model.parameters()).dtype
    w = graph.w.to(dt)
    chosen = torch.zeros(n, dtype=torch.bool)
    # engine pre-pass equivalent: sub-tolerance weights start chosen
    chosen |= w <= 1e-9
    r_state = w.clone()
    live = torch.ones(graph.n_graphs, dtype=torch.bool)
    cap = max_steps if max_steps is not None else max(r.n_elements for r in records)

    r_final = w.clone()
    for _ in range(cap):
        out = model.step(graph, r_state, chosen, live)
        live = out.graph_has_active
        if not live.any():
            break
        chosen = model.decode_selection(out, graph, chosen)
        r_state = torch.where(out.element_active, torch.clamp(out.r_hat, min=0.0), r_state)
        r_state = torch.minimum(r_state, w)
        r_final = r_state
        hit_all = _all_hit(graph, chosen)
        live = live & ~hit_all
        if not live.any():
            break

    results = []
    chosen_np = chosen.numpy()
    r_np = r_final.numpy()
    for g, rec in enumerate(records):
        eo = graph.elem_offset[g]
        local = chosen_np[eo : eo + rec.n_elements]
        sel = set(np.flatnonzero(local).tolist())
        unhit = [t for t in rec.sets if not sel.intersection(t)]
        feasible = not unhit
        cleanup = False
        if unhit:
            cleanup = True
            sel = _greedy_cleanup(rec, sel, r_np[eo : eo + rec.n_elements])
        weight = float(sum(rec.weights[e] for e in sel))
        results.append(
            EvalResult(
                instance_id=rec.instance_id,
                chosen=tuple(sorted(int(e) for e in sel)),
                weight=weight,
                feasible_before_cleanup=feasible,
                cleanup_used=cleanup,
                algo_weight=rec.algo_weight,
                size=rec.n_elements,
                seed_group=rec.meta.get("seed", 0),
            )
        )
    return results


def _all_hit(graph: GraphBatch, chosen: torch.Tensor) -> torch.Tensor:
    hit = torch.zeros(graph.n_sets, dtype=torch.bool)
    ce = chosen[graph.edge_elem]
    if ce.any():
        hit[graph.edge_set[ce]] = True
    unhit_graphs = torch.zeros(graph.n_graphs, dtype=torch.bool)
    if (~hit).any():
        unhit_graphs[graph.set_graph[~hit]] = True
    return ~unhit_graphs


def _greedy_cleanup(rec: TrainRecord, sel: set[int], r: np.ndarray) -> set[int]:
    unhit = [t for t in rec.sets if not sel.intersection(t)]
    while unhit:
        deg = np.zeros(rec.n_elements)
        for t in unhit:
            deg[list(t)] += 1
        cands = sorted({e for t in unhit for e in t})
        best = max(cands, key=lambda e: (r[e] / max(deg[e], 1.0), -e))
        sel.add(int(best))
        unhit = [t for t in unhit if best not in t]
    return sel


def ratio_summary(results: list[EvalResult]) -> dict:
    """Per-size ratio statistics across seed groups, plus rates."""
    cells: dict[tuple, list[float]] = {}
    for res in results:
        if res.algo_weight == 0.0:
            ratio = 1.0 if res.weight == 0.0 else float("inf")
        else:
            ratio = res.weight / res.algo_weight
        cells.setdefault((res.size, res.seed_group), []).append(ratio)
    by_size: dict[int, list[float]] = {}
    for (size, _seed), ratios in cells.items():
        by_size.setdefault(size, []).append(float(np.mean(ratios)))
    summary = {
        "groups": {
            str(size): {
                "mean": float(np.mean(means)),
                "std": float(np.std(means)),
                "n_seeds": len(means),
            }
            for size, means in sorted(by_size.items())
        },
        "feasibility_rate": float(np.mean([r.feasible_before_cleanup for r in results])),
        "cleanup_rate": float(np.mean([r.cleanup_used for r in results])),
        "n_instances": len(results),
    }
    return summary


def evaluate(model: PrimalDualNet, records: list[TrainRecord], batch_size: int = 100) -> dict:
    results: list[EvalResult] = []
    for i in range(0, len(records), batch_size):
        results.extend(free_run(model, records[i : i + batch_size]))
    return ratio_summary(results)


def write_solutions(results: list[EvalResult], path) -> None:
    """Solutions file consumable by the solver-side bench command."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for res in results:
            fh.write(
                json.dumps(
                    {
                        "id": res.instance_id,
                        "chosen": list(res.chosen),
                        "weight": res.weight,
                        "feasible": res.feasible_before_cleanup or res.cleanup_used,
                        "cleanup_used": res.cleanup_used,
                        "size": res.size,
                        "seed_group": res.seed_group,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )
