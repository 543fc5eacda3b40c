"""Primal-dual approximation engine with full per-timestep trajectory capture.

The engine executes the general primal-dual scheme for hitting set: every
round raises the dual variables of all still-unhit subsets until at least one
element's residual weight reaches zero (or epsilon * weight for the relaxed
variants), then adds every tight element to the solution and deactivates the
subsets they hit.  One recorded timestep is exactly one increment pass plus
the tightness/mask pass, which keeps trajectories aligned with the
one-processor-step-per-timestep semantics of the bipartite network.

Degree counts are over *active* subsets throughout (the count drops as
subsets get hit), matching the relaxed vertex/set-cover variants; the
alternative all-subsets count is noted in the docs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instances import (
    HittingSetInstance,
    InvalidInstanceError,
    Solution,
    is_hitting_set,
    make_solution,
)

__all__ = [
    "AlgoConfig",
    "StepRecord",
    "Trajectory",
    "IncompleteTrajectoryError",
    "run_general",
    "run_cover_mvc",
    "run_cover_msc",
    "dual_variables",
    "verify_dual_feasibility",
    "DualReport",
]


class IncompleteTrajectoryError(RuntimeError):
    """Step cap exhausted before the solution became feasible."""


@dataclass(frozen=True)
class AlgoConfig:
    """Execution parameters for a primal-dual run.

    uniform    : apply the uniform-increase rule (all active duals raised by
                 the same amount each round).
    epsilon    : relaxed tightness in [0, 1); an element is tight when its
                 residual drops to at most epsilon * weight.  0 = exact.
    tight_tol  : absolute floor of the tightness test, absorbing float drift
                 in the exact path.
    max_steps  : timestep cap; ``None`` means the element count, which is an
                 upper bound since every pass tightens at least one element.
    """

    uniform: bool = False
    epsilon: float = 0.0
    tight_tol: float = 1e-9
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.tight_tol <= 0:
            raise ValueError("tight_tol must be positive")

    def step_cap(self, instance: HittingSetInstance) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return max(1, instance.n_elements)


@dataclass(frozen=True)
class StepRecord:
    """State after one timestep.

    x      : cumulative 0/1 inclusion flags over elements (monotone in t).
    r      : residual weights over elements (frozen once an element is chosen).
    delta  : per-subset dual increment of this pass, 0 for inactive subsets.
    Delta  : the uniform increment, ``None`` when the rule is off.
    """

    x: np.ndarray
    r: np.ndarray
    delta: np.ndarray
    Delta: float | None

    def allclose(self, other: "StepRecord", tol: float = 1e-9) -> bool:
        if (self.Delta is None) != (other.Delta is None):
            return False
        if self.Delta is not None and abs(self.Delta - other.Delta) > tol:
            return False
        return (
            np.array_equal(self.x, other.x)
            and np.allclose(self.r, other.r, rtol=0.0, atol=tol)
            and np.allclose(self.delta, other.delta, rtol=0.0, atol=tol)
        )


@dataclass(frozen=True)
class Trajectory:
    """Full execution record of one run on one instance."""

    instance_id: str
    algo: str
    config: AlgoConfig
    steps: tuple[StepRecord, ...]
    final_solution: Solution

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def _incidence(instance: HittingSetInstance) -> tuple[np.ndarray, np.ndarray]:
    """Flat (element, subset) incidence arrays, ordered by subset then member."""
    elem = []
    sets = []
    for j, members in enumerate(instance.sets):
        for e in members:
            elem.append(e)
            sets.append(j)
    return np.asarray(elem, dtype=np.int64), np.asarray(sets, dtype=np.int64)


def _active_sets_mask(instance: HittingSetInstance, chosen: np.ndarray) -> np.ndarray:
    """Subsets not yet hit by the chosen mask."""
    return np.fromiter(
        (not chosen[list(members)].any() for members in instance.sets),
        dtype=bool,
        count=instance.n_sets,
    )


def _run_core(instance: HittingSetInstance, config: AlgoConfig, algo: str) -> Trajectory:
    n = instance.n_elements
    m = instance.n_sets
    w = np.asarray(instance.weights, dtype=np.float64)
    r = w.copy()
    chosen = np.zeros(n, dtype=bool)
    inc_elem, inc_set = _incidence(instance)
    steps: list[StepRecord] = []

    set_active = np.ones(m, dtype=bool)
    thresh = np.maximum(config.tight_tol, config.epsilon * w)

    # Pre-pass: elements that are tight at weight already (zero or
    # sub-tolerance weights) are added before any dual increase, so the
    # increment passes never divide by their degenerate residuals.
    pre_tight = w <= config.tight_tol
    if pre_tight.any():
        chosen |= pre_tight
        set_active = _active_sets_mask(instance, chosen)
        steps.append(
            StepRecord(
                x=chosen.astype(np.int8),
                r=r.copy(),
                delta=np.zeros(m),
                Delta=0.0 if config.uniform else None,
            )
        )

    cap = config.step_cap(instance)
    t = 0
    while set_active.any():
        t += 1
        if t > cap:
            raise IncompleteTrajectoryError(
                f"no feasible solution after {cap} timesteps on {instance.id!r}"
            )
        edge_on = set_active[inc_set]
        deg = np.bincount(inc_elem[edge_on], minlength=n)

        # delta_T = min over members of r_e / d_e, for active subsets only.
        ratio = np.where(deg > 0, r / np.maximum(deg, 1), np.inf)
        delta = np.full(m, np.inf)
        np.minimum.at(delta, inc_set[edge_on], ratio[inc_elem[edge_on]])
        delta[~set_active] = 0.0

        if config.uniform:
            Delta = float(delta[set_active].min())
            r = r - deg * Delta
        else:
            Delta = None
            drop = np.zeros(n)
            np.add.at(drop, inc_elem[edge_on], delta[inc_set[edge_on]])
            r = r - drop

        newly = (~chosen) & (r <= thresh)
        if newly.any():
            chosen |= newly
            set_active = _active_sets_mask(instance, chosen)
        steps.append(
            StepRecord(x=chosen.astype(np.int8), r=r.copy(), delta=delta, Delta=Delta)
        )

    solution = make_solution(instance, np.flatnonzero(chosen))
    assert is_hitting_set(instance, solution.chosen)
    return Trajectory(
        instance_id=instance.id,
        algo=algo,
        config=config,
        steps=tuple(steps),
        final_solution=solution,
    )


def run_general(instance: HittingSetInstance, config: AlgoConfig | None = None) -> Trajectory:
    """Run the general primal-dual approximation scheme.

    With exact tightness (epsilon = 0) the solution weight is at most
    alpha * OPT where alpha is the largest subset cardinality, and the run
    takes at most one timestep per element.
    """
    return _run_core(instance, config or AlgoConfig(), "general")


def run_cover_mvc(instance: HittingSetInstance, epsilon: float) -> Trajectory:
    """Relaxed vertex-cover variant: delete a vertex once its residual falls
    to epsilon times its weight.  Gives a 2/(1-epsilon) approximation.

    epsilon must be strictly positive; the relaxation's termination argument
    needs a nonzero slack.
    """
    if instance.task != "mvc":
        raise InvalidInstanceError(f"expected an mvc instance, got {instance.task!r}")
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    return _run_core(instance, AlgoConfig(uniform=False, epsilon=epsilon), "cover-mvc")


def run_cover_msc(instance: HittingSetInstance, epsilon: float) -> Trajectory:
    """Relaxed set-cover variant (hypergraph form of run_cover_mvc).

    Gives an r/(1-epsilon) approximation where r is the maximum subset size.
    """
    if instance.task != "msc":
        raise InvalidInstanceError(f"expected an msc instance, got {instance.task!r}")
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    return _run_core(instance, AlgoConfig(uniform=False, epsilon=epsilon), "cover-msc")


def dual_variables(trajectory: Trajectory, instance: HittingSetInstance) -> np.ndarray:
    """Accumulated dual variable per subset over the whole run.

    Non-uniform runs raise each active subset's dual by its recorded delta;
    uniform runs raise every active subset's dual by the shared Delta.
    """
    if trajectory.instance_id != instance.id:
        raise ValueError("trajectory was not produced on this instance")
    m = instance.n_sets
    y = np.zeros(m)
    chosen = np.zeros(instance.n_elements, dtype=bool)
    for step in trajectory.steps:
        if len(step.delta) != m or len(step.x) != instance.n_elements:
            raise ValueError("trajectory shape does not match instance")
        active = _active_sets_mask(instance, chosen)
        if trajectory.config.uniform:
            if step.Delta:
                y[active] += step.Delta
        else:
            y += step.delta  # recorded as 0 for inactive subsets
        chosen = np.asarray(step.x, dtype=bool)
    return y


@dataclass(frozen=True)
class DualReport:
    feasible: bool
    max_violation: float
    dual_objective: float


def verify_dual_feasibility(
    instance: HittingSetInstance,
    y: Sequence[float],
    tight_tol: float = 1e-9,
) -> DualReport:
    """Check y against the packing constraints: sum of y over the subsets
    containing an element may not exceed that element's weight."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) != instance.n_sets:
        raise ValueError(f"expected {instance.n_sets} dual values, got {len(y)}")
    if (y < 0).any():
        raise ValueError("dual variables must be non-negative")
    load = np.zeros(instance.n_elements)
    for j, members in enumerate(instance.sets):
        load[list(members)] += y[j]
    violation = load - np.asarray(instance.weights)
    max_violation = float(violation.max(initial=0.0))
    return DualReport(
        feasible=bool(max_violation <= tight_tol),
        max_violation=max(0.0, max_violation),
        dual_objective=float(y.sum()),
    )
