"""Hitting-set instances and the reductions from vertex cover and set cover.

An instance is a weighted ground set together with a family of subsets that
must each be intersected ("hit") by a solution.  Vertex cover instances map
vertices to ground elements and edges to 2-element subsets; set cover maps
candidate sets to ground elements and universe items to subsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import math

__all__ = [
    "InvalidInstanceError",
    "InfeasibleInstanceError",
    "HittingSetInstance",
    "Solution",
    "from_vertex_cover",
    "from_set_cover",
    "is_hitting_set",
    "solution_weight",
]

TASKS = ("mvc", "msc", "mhs")


class InvalidInstanceError(ValueError):
    """Raised when instance data violates a structural precondition."""


class InfeasibleInstanceError(ValueError):
    """Raised when no feasible solution can exist (e.g. an empty subset)."""


@dataclass(frozen=True)
class HittingSetInstance:
    """Immutable hitting-set instance.

    Attributes
    ----------
    id : str
        Identifier, unique within a dataset.
    task : str
        One of ``mvc``, ``msc``, ``mhs`` — the reduction this instance
        came from.
    n_elements : int
        Size of the ground set.
    weights : tuple of float
        Non-negative element weights, length ``n_elements``.
    sets : tuple of tuple of int
        The subsets to hit.  Members are strictly increasing element
        indices; every subset is non-empty; duplicate subsets are removed
        at construction.
    meta : mapping
        Free-form generation parameters (family, seed, ...).
    """

    id: str
    task: str
    n_elements: int
    weights: tuple[float, ...]
    sets: tuple[tuple[int, ...], ...]
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise InvalidInstanceError(f"unknown task {self.task!r}")
        if self.n_elements < 0:
            raise InvalidInstanceError("negative element count")
        if len(self.weights) != self.n_elements:
            raise InvalidInstanceError(
                f"expected {self.n_elements} weights, got {len(self.weights)}"
            )
        for w in self.weights:
            if not math.isfinite(w) or w < 0:
                raise InvalidInstanceError(f"weights must be finite and >= 0, got {w}")
        for members in self.sets:
            if not members:
                raise InfeasibleInstanceError("empty subset can never be hit")
            if any(e < 0 or e >= self.n_elements for e in members):
                raise InvalidInstanceError(f"element index out of range in {members}")
            if any(a >= b for a, b in zip(members, members[1:])):
                raise InvalidInstanceError(
                    f"subset members must be strictly increasing, got {members}"
                )

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    def max_set_size(self) -> int:
        """Largest subset cardinality (the approximation factor alpha)."""
        return max((len(t) for t in self.sets), default=0)

    def element_degrees(self) -> list[int]:
        """Number of subsets containing each element."""
        deg = [0] * self.n_elements
        for members in self.sets:
            for e in members:
                deg[e] += 1
        return deg

    def structurally_equal(self, other: "HittingSetInstance") -> bool:
        """Equality on (task, n_elements, weights, sets); id and meta ignored."""
        return (
            self.task == other.task
            and self.n_elements == other.n_elements
            and self.weights == other.weights
            and self.sets == other.sets
        )


@dataclass(frozen=True)
class Solution:
    """A chosen subset of ground elements with its total weight."""

    chosen: tuple[int, ...]
    weight: float

    def __post_init__(self) -> None:
        if any(a >= b for a, b in zip(self.chosen, self.chosen[1:])):
            raise ValueError("chosen indices must be strictly increasing")


def make_solution(instance: HittingSetInstance, chosen: Iterable[int]) -> Solution:
    """Build a Solution with the weight recomputed from the instance."""
    idx = tuple(int(e) for e in sorted(set(chosen)))
    return Solution(chosen=idx, weight=solution_weight(instance, idx))


def _canonical_sets(
    raw_sets: Iterable[Iterable[int]], n_elements: int
) -> tuple[tuple[int, ...], ...]:
    """Sort members, drop duplicate subsets, keep first-occurrence order."""
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    for members in raw_sets:
        canon = tuple(sorted(set(members)))
        if not canon:
            raise InfeasibleInstanceError("empty subset can never be hit")
        if any(e < 0 or e >= n_elements for e in canon):
            raise InvalidInstanceError(f"element index out of range in {canon}")
        if canon not in seen:
            seen.add(canon)
            out.append(canon)
    return tuple(out)


def make_instance(
    task: str,
    weights: Sequence[float],
    sets: Iterable[Iterable[int]],
    id: str = "",
    meta: Mapping[str, object] | None = None,
) -> HittingSetInstance:
    """Construct an instance in canonical form (sorted members, deduped sets)."""
    n = len(weights)
    return HittingSetInstance(
        id=id,
        task=task,
        n_elements=n,
        weights=tuple(float(w) for w in weights),
        sets=_canonical_sets(sets, n),
        meta=dict(meta or {}),
    )


def from_vertex_cover(
    n_vertices: int,
    edges: Iterable[tuple[int, int]],
    weights: Sequence[float],
    id: str = "",
    meta: Mapping[str, object] | None = None,
) -> HittingSetInstance:
    """Reduce weighted vertex cover to hitting set.

    Each vertex becomes a ground element, each edge a 2-element subset.
    Parallel edges are deduplicated; self-loops are rejected since a loop
    cannot be covered by the standard vertex-cover constraint x_u + x_v >= 1
    on distinct endpoints.
    """
    if len(weights) != n_vertices:
        raise InvalidInstanceError(
            f"expected {n_vertices} vertex weights, got {len(weights)}"
        )
    pairs = []
    for u, v in edges:
        if u == v:
            raise InvalidInstanceError(f"self-loop at vertex {u}")
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise InvalidInstanceError(f"edge ({u}, {v}) out of range")
        pairs.append((u, v))
    return make_instance("mvc", weights, pairs, id=id, meta=meta)


def from_set_cover(
    n_universe: int,
    family: Sequence[Iterable[int]],
    weights: Sequence[float],
    id: str = "",
    meta: Mapping[str, object] | None = None,
) -> HittingSetInstance:
    """Reduce weighted set cover to hitting set.

    Ground elements are the candidate sets of the family; for every universe
    item there is one subset listing the family members that contain it.
    Choosing a hitting set of those subsets is exactly choosing a subfamily
    that covers the universe.
    """
    if len(weights) != len(family):
        raise InvalidInstanceError(
            f"expected {len(family)} set weights, got {len(weights)}"
        )
    covering: list[list[int]] = [[] for _ in range(n_universe)]
    for s_idx, members in enumerate(family):
        for u in members:
            if not (0 <= u < n_universe):
                raise InvalidInstanceError(f"universe item {u} out of range")
            covering[u].append(s_idx)
    for u, covers in enumerate(covering):
        if not covers:
            raise InfeasibleInstanceError(f"universe item {u} is not covered by any set")
    return make_instance("msc", weights, covering, id=id, meta=meta)


def is_hitting_set(instance: HittingSetInstance, solution: Iterable[int]) -> bool:
    """True iff every subset of the instance contains a chosen element."""
    chosen = set(solution)
    for e in chosen:
        if not (0 <= e < instance.n_elements):
            raise InvalidInstanceError(f"solution index {e} out of range")
    return all(chosen.intersection(members) for members in instance.sets)


def solution_weight(instance: HittingSetInstance, chosen: Sequence[int]) -> float:
    """Total weight of the chosen elements.

    Indices must be valid and distinct; duplicates would double-count.
    """
    seen: set[int] = set()
    total = 0.0
    for e in chosen:
        if not (0 <= e < instance.n_elements):
            raise InvalidInstanceError(f"solution index {e} out of range")
        if e in seen:
            raise InvalidInstanceError(f"duplicate index {e} in solution")
        seen.add(e)
        total += instance.weights[e]
    return total
