"""Evaluation metrics, feasibility cleanup, and solver file exports.

The ratio metric follows the benchmark protocol: per-instance ratios of
model weight to algorithm weight are averaged within each seed group, then
summarized as mean and standard deviation across the groups.

Export formats target external MILP solvers: a CPLEX-style LP text document
of the integer program, and an MST warm-start document assigning 0/1 to
every variable.  Variables are named ``x_<element-index>`` everywhere so the
two files and the model outputs agree byte-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .instances import (
    HittingSetInstance,
    Solution,
    make_instance,
    make_solution,
)

__all__ = [
    "SolutionEntry",
    "RatioReport",
    "greedy_cleanup",
    "ratio_report",
    "export_mst",
    "parse_mst",
    "export_lp",
    "parse_lp",
]

_FMT = "%.17g"


def greedy_cleanup(
    instance: HittingSetInstance,
    partial: Solution,
    r: Sequence[float],
    d: Sequence[int],
) -> Solution:
    """Complete a partial solution to feasibility.

    Repeatedly adds the element with the highest residual-per-degree ratio
    among members of still-unhit subsets (ties to the lowest index).  The
    passed degrees rank the first pick; degrees are recomputed as subsets
    get hit so stale counts cannot stall the loop.
    """
    r = np.asarray(r, dtype=np.float64)
    if len(r) != instance.n_elements or len(d) != instance.n_elements:
        raise ValueError("r and d must have one entry per element")
    chosen = set(partial.chosen)
    unhit = [members for members in instance.sets if not chosen.intersection(members)]
    degrees = np.asarray(d, dtype=np.float64)
    while unhit:
        candidates = sorted({e for members in unhit for e in members})
        best = max(candidates, key=lambda e: (r[e] / max(degrees[e], 1.0), -e))
        chosen.add(best)
        unhit = [members for members in unhit if best not in members]
        degrees = np.zeros(instance.n_elements)
        for members in unhit:
            degrees[list(members)] += 1
    return make_solution(instance, chosen)


@dataclass(frozen=True)
class SolutionEntry:
    """One solved instance as consumed by the ratio metric."""

    instance_id: str
    weight: float
    feasible: bool = True
    cleanup_used: bool = False


@dataclass(frozen=True)
class RatioReport:
    """Per-group ratio summary.

    groups maps a group key (e.g. problem size) to
    ``{"mean": .., "std": .., "n_seeds": ..}`` where the statistics are taken
    over per-seed averages of the instance ratios.
    """

    groups: Mapping[object, Mapping[str, float]]
    feasibility_rate: float
    cleanup_rate: float
    n_instances: int


def ratio_report(
    model_solutions: Sequence[SolutionEntry],
    algo_solutions: Sequence[SolutionEntry],
    grouping: Mapping[str, tuple[object, object]] | None = None,
) -> RatioReport:
    """Model-to-algorithm weight ratios aggregated per (group, seed).

    grouping maps instance id to a (group_key, seed_key) pair; ids missing
    from it fall into a single default group.  Model and algorithm entries
    must cover the same ids.
    """
    algo_by_id = {s.instance_id: s for s in algo_solutions}
    if sorted(algo_by_id) != sorted({s.instance_id for s in model_solutions}):
        raise ValueError("model and algorithm solutions cover different instance ids")

    per_cell: dict[tuple[object, object], list[float]] = {}
    feasible = 0
    cleaned = 0
    for entry in model_solutions:
        algo = algo_by_id[entry.instance_id]
        if algo.weight == 0.0:
            ratio = 1.0 if entry.weight == 0.0 else math.inf
        else:
            ratio = entry.weight / algo.weight
        group, seed = (grouping or {}).get(entry.instance_id, ("all", "all"))
        per_cell.setdefault((group, seed), []).append(ratio)
        feasible += entry.feasible
        cleaned += entry.cleanup_used

    by_group: dict[object, list[float]] = {}
    for (group, _seed), ratios in per_cell.items():
        by_group.setdefault(group, []).append(float(np.mean(ratios)))
    groups = {
        group: {
            "mean": float(np.mean(seed_means)),
            "std": float(np.std(seed_means)),
            "n_seeds": float(len(seed_means)),
        }
        for group, seed_means in sorted(by_group.items(), key=lambda kv: str(kv[0]))
    }
    n = len(model_solutions)
    return RatioReport(
        groups=groups,
        feasibility_rate=feasible / n if n else 1.0,
        cleanup_rate=cleaned / n if n else 0.0,
        n_instances=n,
    )


def export_mst(
    instance: HittingSetInstance, solution: Solution, varname_scheme: str = "x_{}"
) -> str:
    """Warm-start document: one ``<name> <0|1>`` line per element."""
    chosen = set(solution.chosen)
    lines = [
        f"# warm start for instance {instance.id}",
        f"# objective {_FMT % solution.weight}",
    ]
    for e in range(instance.n_elements):
        lines.append(f"{varname_scheme.format(e)} {1 if e in chosen else 0}")
    return "\n".join(lines) + "\n"


def parse_mst(text: str) -> tuple[int, ...]:
    """Chosen element indices from an MST document written by export_mst."""
    chosen = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or not parts[0].startswith("x_"):
            raise ValueError(f"line {lineno}: expected 'x_<i> <0|1>', got {line!r}")
        idx = int(parts[0][2:])
        val = int(parts[1])
        if val not in (0, 1):
            raise ValueError(f"line {lineno}: value must be 0 or 1")
        if val:
            chosen.append(idx)
    return tuple(sorted(chosen))


def export_lp(instance: HittingSetInstance) -> str:
    """LP-format text of the integer program.

    Objective: minimize the weighted element sum; one >= 1 covering row per
    subset; all variables binary.  Coefficients carry 17 significant digits
    so parsing them back is exact.
    """
    lines = [f"\\ hitting set instance id={instance.id} task={instance.task}"]
    lines.append("Minimize")
    terms = [f"{_FMT % instance.weights[e]} x_{e}" for e in range(instance.n_elements)]
    lines.extend(_wrap_terms("obj:", terms))
    lines.append("Subject To")
    for j, members in enumerate(instance.sets):
        terms = [f"x_{e}" for e in members]
        lines.extend(_wrap_terms(f"c{j}:", terms, tail=">= 1"))
    lines.append("Binary")
    names = [f"x_{e}" for e in range(instance.n_elements)]
    for i in range(0, len(names), 10):
        lines.append(" " + " ".join(names[i : i + 10]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _wrap_terms(label: str, terms: list[str], tail: str = "", per_line: int = 8) -> list[str]:
    if not terms:
        row = [f" {label} 0"]
        return [row[0] + (f" {tail}" if tail else "")]
    out = []
    for i in range(0, len(terms), per_line):
        chunk = " + ".join(terms[i : i + per_line])
        prefix = f" {label} " if i == 0 else "   + "
        out.append(prefix + chunk)
    if tail:
        out[-1] += f" {tail}"
    return out


def parse_lp(text: str) -> HittingSetInstance:
    """Rebuild the instance from an LP document written by export_lp."""
    inst_id = ""
    task = "mhs"
    section = None
    obj_tokens: list[str] = []
    rows: dict[str, list[str]] = {}
    row_order: list[str] = []
    current_row = None
    binaries: set[int] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            for token in line[1:].split():
                if token.startswith("id="):
                    inst_id = token[3:]
                if token.startswith("task="):
                    task = token[5:]
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "binary", "end"):
            section = low
            current_row = None
            continue
        if section == "minimize":
            if ":" in line:
                line = line.split(":", 1)[1]
            obj_tokens.extend(line.replace("+", " ").split())
        elif section == "subject to":
            if ":" in line:
                current_row, line = line.split(":", 1)
                current_row = current_row.strip()
                rows[current_row] = []
                row_order.append(current_row)
            if current_row is None:
                raise ValueError(f"line {lineno}: constraint body before a row label")
            rows[current_row].extend(line.replace("+", " ").split())
        elif section == "binary":
            for token in line.split():
                binaries.add(_var_index(token, lineno))
        elif section == "end":
            raise ValueError(f"line {lineno}: content after End")
        else:
            raise ValueError(f"line {lineno}: content before a section header")

    n = max(binaries) + 1 if binaries else 0
    if len(binaries) != n:
        raise ValueError("binary section must cover x_0 .. x_{n-1}")
    if len(obj_tokens) % 2 != 0:
        raise ValueError("objective must be a sum of '<coef> <var>' terms")
    weights = [0.0] * n
    for i in range(0, len(obj_tokens), 2):
        try:
            coef = float(obj_tokens[i])
        except ValueError as exc:
            raise ValueError(f"bad objective coefficient {obj_tokens[i]!r}") from exc
        var = _var_index(obj_tokens[i + 1], 0)
        if not (0 <= var < n):
            raise ValueError(f"objective variable x_{var} missing from Binary section")
        weights[var] = coef
    sets = []
    for name in row_order:
        tokens = rows[name]
        if tokens[-2:] != [">=", "1"]:
            raise ValueError(f"row {name}: expected '>= 1' covering constraint")
        members = [_var_index(tok, 0) for tok in tokens[:-2]]
        if any(not (0 <= e < n) for e in members):
            raise ValueError(f"row {name}: variable missing from Binary section")
        sets.append(members)
    return make_instance(task, weights, sets, id=inst_id)


def _var_index(token: str, lineno: int) -> int:
    if not token.startswith("x_"):
        raise ValueError(f"line {lineno}: expected variable token, got {token!r}")
    return int(token[2:])
