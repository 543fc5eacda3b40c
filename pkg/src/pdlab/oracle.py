"""Exact optimum for small hitting-set instances.

solve_optimal is a self-contained branch-and-bound: binary branching on the
element with the best degree-to-weight ratio, an admissible bound built from
residual weight-per-degree minima, and the primal-dual solution as the
initial incumbent.  solve_bruteforce enumerates all subsets and serves as an
independent check of the search.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .engine import AlgoConfig, run_general
from .instances import HittingSetInstance, InfeasibleInstanceError

__all__ = ["OptimalSolution", "solve_optimal", "solve_bruteforce"]

_BRUTE_LIMIT = 25
_CHUNK_BITS = 18


@dataclass(frozen=True)
class OptimalSolution:
    """Best solution found, with a certificate status.

    status is ``optimal`` when the search space was exhausted, ``timeout``
    when the budget expired and ``chosen`` is only an incumbent.
    """

    chosen: tuple[int, ...]
    weight: float
    status: str
    nodes_explored: int


class _Timeout(Exception):
    pass


def _set_masks(instance: HittingSetInstance) -> list[int]:
    return [sum(1 << e for e in members) for members in instance.sets]


class _BranchAndBound:
    def __init__(self, instance: HittingSetInstance, deadline: float | None):
        self.inst = instance
        self.w = instance.weights
        self.masks = _set_masks(instance)
        self.deadline = deadline
        self.nodes = 0
        # Zero-weight elements are free: take them all up front.  They only
        # shrink the search space and never change the optimal weight.
        self.free_bits = sum(1 << e for e, w in enumerate(self.w) if w == 0.0)
        self.best_bits = 0
        self.best_weight = np.inf

    def _check_budget(self) -> None:
        self.nodes += 1
        if self.deadline is not None and self.nodes % 256 == 0:
            if time.monotonic() > self.deadline:
                raise _Timeout

    def _bound(self, unhit: list[int], banned: int) -> float:
        """Admissible bound: every unhit subset pays at least the smallest
        weight-per-degree among its still-available elements."""
        degree: dict[int, int] = {}
        members_cache: list[list[int]] = []
        for j in unhit:
            avail = self.masks[j] & ~banned
            members = []
            while avail:
                low = avail & -avail
                e = low.bit_length() - 1
                members.append(e)
                degree[e] = degree.get(e, 0) + 1
                avail ^= low
            members_cache.append(members)
        total = 0.0
        for members in members_cache:
            total += min(self.w[e] / degree[e] for e in members)
        return total

    def solve(self) -> None:
        unhit = [j for j, mask in enumerate(self.masks) if not (mask & self.free_bits)]
        self._descend(self.free_bits, 0, unhit, 0.0)

    def _descend(self, chosen: int, banned: int, unhit: list[int], weight: float) -> None:
        self._check_budget()
        if weight >= self.best_weight:
            return
        if not unhit:
            self.best_weight = weight
            self.best_bits = chosen
            return
        # Infeasibility of this branch: some subset has no available element.
        candidates = 0
        for j in unhit:
            avail = self.masks[j] & ~banned
            if avail == 0:
                return
            candidates |= avail
        if weight + self._bound(unhit, banned) >= self.best_weight:
            return

        # Branch on the available element hitting the most subsets per unit
        # weight; ties broken by lowest index for reproducible labels.
        best_e, best_score = -1, -1.0
        for e in _bits(candidates):
            d = sum(1 for j in unhit if self.masks[j] >> e & 1)
            score = d / self.w[e] if self.w[e] > 0 else np.inf
            if score > best_score:
                best_e, best_score = e, score
        bit = 1 << best_e

        still = [j for j in unhit if not (self.masks[j] & bit)]
        self._descend(chosen | bit, banned, still, weight + self.w[best_e])
        self._descend(chosen, banned | bit, unhit, weight)


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def solve_optimal(
    instance: HittingSetInstance, time_budget_ms: float = 10_000.0
) -> OptimalSolution:
    """Provably minimum-weight hitting set, or the best incumbent on timeout.

    The search is deterministic: fixed branching rule, lowest-index
    tie-breaks, and strict-improvement incumbent updates.
    """
    if any(not members for members in instance.sets):
        raise InfeasibleInstanceError("instance contains an empty subset")
    deadline = time.monotonic() + time_budget_ms / 1000.0

    bb = _BranchAndBound(instance, deadline)
    warm = run_general(instance, AlgoConfig()).final_solution
    bb.best_bits = sum(1 << e for e in warm.chosen) | bb.free_bits
    bb.best_weight = sum(instance.weights[e] for e in _bits(bb.best_bits))
    status = "optimal"
    try:
        bb.solve()
    except _Timeout:
        status = "timeout"
    chosen = tuple(_bits(bb.best_bits))
    return OptimalSolution(
        chosen=chosen,
        weight=float(sum(instance.weights[e] for e in chosen)),
        status=status,
        nodes_explored=bb.nodes,
    )


def solve_bruteforce(instance: HittingSetInstance) -> OptimalSolution:
    """Exhaustive enumeration over all element subsets (n <= 25).

    Ties are resolved toward the lowest subset bitmask, so results are
    reproducible and comparable against the branch-and-bound.
    """
    n = instance.n_elements
    if n > _BRUTE_LIMIT:
        raise ValueError(f"brute force supports up to {_BRUTE_LIMIT} elements, got {n}")
    if any(not members for members in instance.sets):
        raise InfeasibleInstanceError("instance contains an empty subset")
    masks = np.asarray(_set_masks(instance), dtype=np.int64)
    w = np.asarray(instance.weights)

    best_weight = np.inf
    best_subset = -1
    total = 1 << n
    chunk = 1 << min(_CHUNK_BITS, n)
    for start in range(0, total, chunk):
        subsets = np.arange(start, min(start + chunk, total), dtype=np.int64)
        feasible = np.ones(len(subsets), dtype=bool)
        for mask in masks:
            feasible &= (subsets & mask) != 0
        if not feasible.any():
            continue
        cand = subsets[feasible]
        weight = np.zeros(len(cand))
        for e in range(n):
            weight += w[e] * ((cand >> e) & 1)
        k = int(np.argmin(weight))  # first minimum = lowest bitmask
        if weight[k] < best_weight:
            best_weight = float(weight[k])
            best_subset = int(cand[k])
    return OptimalSolution(
        chosen=tuple(_bits(best_subset)) if best_subset >= 0 else (),
        weight=best_weight if best_subset >= 0 else 0.0,
        status="optimal",
        nodes_explored=total,
    )
