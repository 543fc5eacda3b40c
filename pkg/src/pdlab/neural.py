"""Bipartite message-passing forward engine and its constructive weights.

The network mirrors one engine timestep per forward pass: element residuals
and degrees are encoded into a latent space, a min-aggregation over the
element-subset incidence produces one latent per active subset (the dual
increment), an optional virtual node takes the global min for the uniform
rule, and a sum-aggregation back to the elements applies the residual
update.  Four linear decoders read out inclusion probability, residual,
per-subset increment and the uniform increment.

``analytic_weights`` builds the exact parameterization: with first-coordinate
value carrying, the message MLP computes ELU(ln r - ln d) + 1 = r/d, the
update computes r - sum(delta), and decoders project coordinate 0, so the
rollout reproduces the engine bit-for-bit up to log/exp rounding.  That
construction needs weights in (0, 1] so the encoded logs stay non-positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bench import greedy_cleanup
from .engine import AlgoConfig, Trajectory, run_general
from .instances import HittingSetInstance, Solution, make_instance, make_solution

__all__ = [
    "ModelWeights",
    "StepOutput",
    "PredStep",
    "PredictedTrajectory",
    "ReplicationReport",
    "EmptyStepError",
    "tensor_shapes",
    "analytic_weights",
    "forward_step",
    "rollout",
    "verify_replication",
]

R_CLAMP = 1e-12
ANALYTIC_TEMPERATURE = 1e12
ANALYTIC_TIGHT_TOL = 1e-9


class EmptyStepError(RuntimeError):
    """Forward pass invoked with no active subsets."""


def tensor_shapes(hidden_dim: int, uniform: bool) -> dict[str, tuple[int, ...]]:
    """Required tensor names and shapes for a given architecture."""
    h = hidden_dim
    shapes = {
        "f_r.w": (h, 1),
        "f_r.b": (h,),
        "f_d.w": (h, 1),
        "f_d.b": (h,),
        "g_e.w1": (h, 2 * h),
        "g_e.b1": (h,),
        "g_e.w2": (h, h),
        "g_e.b2": (h,),
        "g_u.pre_b": (h,),
        "g_u.w": (h, 2 * h),
        "g_u.b": (h,),
        "q_x.w": (1, h),
        "q_x.b": (1,),
        "q_r.w": (1, h),
        "q_r.b": (1,),
        "q_delta.w": (1, h),
        "q_delta.b": (1,),
    }
    if uniform:
        shapes["q_Delta.w"] = (1, h)
        shapes["q_Delta.b"] = (1,)
    return shapes


@dataclass(frozen=True)
class ModelWeights:
    """Named dense parameters plus the architecture switches they assume.

    degree_transform is ``log1p`` for trained models (ln(d + 1), robust to
    high degree variance) and ``log`` for the analytic construction (exact
    ln d).  temperature scales the inclusion decoder's logit before the
    sigmoid.
    """

    hidden_dim: int
    uniform: bool
    tensors: Mapping[str, np.ndarray]
    activation: str = "elu"
    degree_transform: str = "log1p"
    decode_threshold: float = 0.5
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.activation not in ("elu", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.degree_transform not in ("log", "log1p"):
            raise ValueError(f"unknown degree transform {self.degree_transform!r}")
        expected = tensor_shapes(self.hidden_dim, self.uniform)
        missing = sorted(set(expected) - set(self.tensors))
        if missing:
            raise ValueError(f"missing tensors: {missing}")
        for name, shape in expected.items():
            t = np.asarray(self.tensors[name])
            if t.shape != shape:
                raise ValueError(f"tensor {name} has shape {t.shape}, expected {shape}")
            if not np.isfinite(t).all():
                raise ValueError(f"tensor {name} has non-finite entries")


@dataclass(frozen=True)
class StepOutput:
    """One forward pass.  Element entries are only defined where the element
    was active (others are NaN); inactive subsets decode delta as 0."""

    x_hat: np.ndarray
    r_hat: np.ndarray
    delta_hat: np.ndarray
    Delta_hat: float | None


@dataclass(frozen=True)
class PredStep:
    x_hat: np.ndarray
    r_hat: np.ndarray
    delta_hat: np.ndarray
    Delta_hat: float | None


@dataclass(frozen=True)
class PredictedTrajectory:
    instance_id: str
    steps: tuple[PredStep, ...]
    final_solution: Solution
    cleanup_used: bool


def analytic_weights(
    hidden_dim: int,
    uniform: bool,
    tight_tol: float = ANALYTIC_TIGHT_TOL,
    temperature: float = ANALYTIC_TEMPERATURE,
) -> ModelWeights:
    """The constructive parameterization replicating the engine exactly.

    Only first coordinates are populated: encoders write ln r and ln d into
    coordinate 0, the message MLP's single useful unit computes
    ELU(ln r - ln d) + 1 = r/d, the update subtracts the aggregated message
    from the reconstituted residual, and each decoder projects coordinate 0.
    The inclusion decoder fires at residual <= tight_tol, matching the
    engine's exact-tightness test at any temperature.
    """
    if hidden_dim < 1:
        raise ValueError("hidden_dim must be >= 1")
    h = hidden_dim
    t = {name: np.zeros(shape) for name, shape in tensor_shapes(h, uniform).items()}
    t["f_r.w"][0, 0] = 1.0
    t["f_d.w"][0, 0] = 1.0
    t["g_e.w1"][0, 0] = 1.0
    t["g_e.w1"][0, h] = -1.0
    t["g_e.w2"][0, 0] = 1.0
    t["g_e.b2"][0] = 1.0
    t["g_u.pre_b"][0] = 1.0
    t["g_u.w"][0, 0] = 1.0
    t["g_u.w"][0, h] = -1.0
    t["q_r.w"][0, 0] = 1.0
    t["q_delta.w"][0, 0] = 1.0
    if uniform:
        t["q_Delta.w"][0, 0] = 1.0
    t["q_x.w"][0, 0] = -1.0
    t["q_x.b"][0] = tight_tol
    return ModelWeights(
        hidden_dim=h,
        uniform=uniform,
        tensors=t,
        activation="elu",
        degree_transform="log",
        temperature=temperature,
    )


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    out = np.where(x > 0, x, 0.0)
    neg = x <= 0
    out[neg] = np.expm1(x[neg])
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _incidence(instance: HittingSetInstance) -> tuple[np.ndarray, np.ndarray]:
    elem, sets = [], []
    for j, members in enumerate(instance.sets):
        for e in members:
            elem.append(e)
            sets.append(j)
    return np.asarray(elem, dtype=np.int64), np.asarray(sets, dtype=np.int64)


def forward_step(
    weights: ModelWeights,
    instance: HittingSetInstance,
    r: np.ndarray,
    element_active: np.ndarray,
    set_active: np.ndarray,
) -> StepOutput:
    """One message-passing round over the active bipartite subgraph."""
    if not set_active.any():
        raise EmptyStepError("no active subsets; nothing to process")
    n, m = instance.n_elements, instance.n_sets
    h = weights.hidden_dim
    ten = weights.tensors
    inc_elem, inc_set = _incidence(instance)
    edge_on = set_active[inc_set] & element_active[inc_elem]

    deg = np.bincount(inc_elem[edge_on], minlength=n).astype(np.float64)
    log_r = np.log(np.maximum(r, R_CLAMP))
    if weights.degree_transform == "log":
        log_d = np.log(np.maximum(deg, 1.0))
    else:
        log_d = np.log1p(deg)

    h_e = log_r[:, None] * ten["f_r.w"][:, 0][None, :] + ten["f_r.b"]
    h_d = log_d[:, None] * ten["f_d.w"][:, 0][None, :] + ten["f_d.b"]

    src = inc_elem[edge_on]
    dst = inc_set[edge_on]
    z = np.concatenate([h_e[src], h_d[src]], axis=1)
    hid = _act(z @ ten["g_e.w1"].T + ten["g_e.b1"], weights.activation)
    msg = hid @ ten["g_e.w2"].T + ten["g_e.b2"]

    h_t = np.full((m, h), np.inf)
    np.minimum.at(h_t, dst, msg)
    if np.isinf(h_t[set_active]).any():
        raise EmptyStepError("active subset with an empty neighborhood")

    delta_hat = np.zeros(m)
    delta_hat[set_active] = (h_t[set_active] @ ten["q_delta.w"].T + ten["q_delta.b"])[:, 0]

    if weights.uniform:
        h_z = h_t[set_active].min(axis=0)
        Delta_hat = float((h_z @ ten["q_Delta.w"].T + ten["q_Delta.b"])[0])
        h_t_eff = np.where(set_active[:, None], h_z[None, :], 0.0)
    else:
        Delta_hat = None
        h_t_eff = np.where(set_active[:, None], h_t, 0.0)

    msum = np.zeros((n, h))
    np.add.at(msum, src, h_t_eff[dst])

    pre = _act(h_e, weights.activation) + ten["g_u.pre_b"]
    u = np.concatenate([pre, msum], axis=1)
    h_new = u @ ten["g_u.w"].T + ten["g_u.b"]

    r_hat = np.full(n, np.nan)
    x_hat = np.full(n, np.nan)
    act_idx = np.flatnonzero(element_active)
    r_hat[act_idx] = (h_new[act_idx] @ ten["q_r.w"].T + ten["q_r.b"])[:, 0]
    logits = (h_new[act_idx] @ ten["q_x.w"].T + ten["q_x.b"])[:, 0]
    x_hat[act_idx] = _sigmoid(weights.temperature * logits)
    return StepOutput(x_hat=x_hat, r_hat=r_hat, delta_hat=delta_hat, Delta_hat=Delta_hat)


def _active_sets_for(instance: HittingSetInstance, chosen: np.ndarray) -> np.ndarray:
    return np.fromiter(
        (not chosen[list(members)].any() for members in instance.sets),
        dtype=bool,
        count=instance.n_sets,
    )


def rollout(
    weights: ModelWeights,
    instance: HittingSetInstance,
    mode: str = "free_run",
    trajectory: Trajectory | None = None,
    max_steps: int | None = None,
    tight_tol: float = ANALYTIC_TIGHT_TOL,
) -> PredictedTrajectory:
    """Recurrent application of the forward pass over one instance.

    free_run feeds the model its own predictions: residual feedback is the
    decoded r clamped into [0, w], and the mask update follows the decoded
    inclusions (threshold rule, or the single best element per step when the
    architecture carries the uniform virtual node).  teacher_forced feeds
    ground-truth residuals and masks from the given trajectory instead.

    If the free run exhausts its step cap without hitting every subset, the
    greedy residual-per-degree cleanup completes the solution and the
    ``cleanup_used`` flag is set.
    """
    if mode not in ("free_run", "teacher_forced"):
        raise ValueError(f"unknown rollout mode {mode!r}")
    if mode == "teacher_forced":
        if trajectory is None:
            raise ValueError("teacher_forced mode needs a trajectory")
        if trajectory.instance_id != instance.id:
            raise ValueError("trajectory was not produced on this instance")
    n = instance.n_elements
    w = np.asarray(instance.weights, dtype=np.float64)
    chosen = np.zeros(n, dtype=bool)
    steps: list[PredStep] = []

    # Mirror the engine's pre-pass: sub-tolerance weights are chosen before
    # any processor step and their subsets masked out.
    pre_tight = w <= tight_tol
    if pre_tight.any():
        chosen |= pre_tight
        steps.append(
            PredStep(
                x_hat=chosen.astype(np.float64),
                r_hat=w.copy(),
                delta_hat=np.zeros(instance.n_sets),
                Delta_hat=0.0 if weights.uniform else None,
            )
        )
    set_active = _active_sets_for(instance, chosen)
    r_state = w.copy()
    prev_x = chosen.astype(np.float64)
    prev_r = w.copy()

    if mode == "teacher_forced":
        offset = 1 if pre_tight.any() else 0
        gt_steps = list(trajectory.steps[offset:])
        cap = len(gt_steps)
    else:
        gt_steps = []
        cap = max_steps if max_steps is not None else max(1, n)

    cleanup_used = False
    for t in range(cap):
        if not set_active.any():
            break
        out = forward_step(weights, instance, r_state, ~chosen, set_active)

        x_rec = np.where(np.isnan(out.x_hat), prev_x, out.x_hat)
        r_rec = np.where(np.isnan(out.r_hat), prev_r, out.r_hat)
        steps.append(
            PredStep(x_hat=x_rec, r_hat=r_rec, delta_hat=out.delta_hat, Delta_hat=out.Delta_hat)
        )

        if mode == "teacher_forced":
            gt = gt_steps[t]
            chosen = np.asarray(gt.x, dtype=bool)
            r_state = np.asarray(gt.r, dtype=np.float64).copy()
        else:
            active = ~chosen
            if weights.uniform:
                cand = np.flatnonzero(active)
                pick = cand[int(np.argmax(x_rec[cand]))]
                newly = np.zeros(n, dtype=bool)
                newly[pick] = True
            else:
                newly = active & (x_rec >= weights.decode_threshold)
            chosen |= newly
            r_state = np.clip(r_rec, 0.0, w)
        set_active = _active_sets_for(instance, chosen)
        prev_x = np.where(chosen, 1.0, x_rec)
        prev_r = r_rec

    if mode == "teacher_forced":
        # Selection follows the model's own final decoding.
        final_x = steps[-1].x_hat if steps else np.zeros(n)
        chosen = np.asarray(final_x >= weights.decode_threshold, dtype=bool) | pre_tight
        set_active = _active_sets_for(instance, chosen)

    if set_active.any() or not _hits_all(instance, chosen):
        partial = make_solution(instance, np.flatnonzero(chosen))
        deg = _active_degree(instance, chosen)
        completed = greedy_cleanup(instance, partial, r_state, deg)
        cleanup_used = True
        final = completed
    else:
        final = make_solution(instance, np.flatnonzero(chosen))
    return PredictedTrajectory(
        instance_id=instance.id,
        steps=tuple(steps),
        final_solution=final,
        cleanup_used=cleanup_used,
    )


def _hits_all(instance: HittingSetInstance, chosen: np.ndarray) -> bool:
    return not _active_sets_for(instance, chosen).any()


def _active_degree(instance: HittingSetInstance, chosen: np.ndarray) -> np.ndarray:
    deg = np.zeros(instance.n_elements, dtype=np.int64)
    for j, members in enumerate(instance.sets):
        if not chosen[list(members)].any():
            deg[list(members)] += 1
    return deg


@dataclass(frozen=True)
class ReplicationReport:
    max_err: Mapping[str, float]
    steps_match: bool
    solutions_equal: bool

    def passed(self, tol: float) -> bool:
        return (
            self.steps_match
            and self.solutions_equal
            and all(v <= tol for v in self.max_err.values())
        )


def verify_replication(
    instance: HittingSetInstance,
    hidden_dim: int,
    tol: float = 1e-6,
    uniform: bool | None = None,
) -> ReplicationReport:
    """Run the engine and the analytic rollout in lockstep and diff them.

    Weights are rescaled into (0, 1] first (the construction needs
    non-positive encoded logs); reported deviations are mapped back to the
    original scale, which is sound because the engine is scale-equivariant.
    """
    if uniform is None:
        uniform = instance.task == "mhs"
    scale = max(instance.weights) if instance.weights else 1.0
    if scale <= 0:
        scale = 1.0
    scaled = make_instance(
        instance.task,
        [w / scale for w in instance.weights],
        instance.sets,
        id=instance.id,
        meta=instance.meta,
    )
    engine_traj = run_general(scaled, AlgoConfig(uniform=uniform))
    model = analytic_weights(hidden_dim, uniform)
    pred = rollout(model, scaled, mode="free_run")

    err = {"x": 0.0, "r": 0.0, "delta": 0.0, "Delta": 0.0}
    steps_match = len(engine_traj.steps) == len(pred.steps)
    for gt, hat in zip(engine_traj.steps, pred.steps):
        err["x"] = max(err["x"], float(np.abs(hat.x_hat - gt.x).max(initial=0.0)))
        err["r"] = max(err["r"], float(np.abs(hat.r_hat - gt.r).max(initial=0.0)) * scale)
        err["delta"] = max(
            err["delta"], float(np.abs(hat.delta_hat - gt.delta).max(initial=0.0)) * scale
        )
        if gt.Delta is not None and hat.Delta_hat is not None:
            err["Delta"] = max(err["Delta"], abs(hat.Delta_hat - gt.Delta) * scale)
        elif (gt.Delta is None) != (hat.Delta_hat is None):
            steps_match = False
    solutions_equal = (
        engine_traj.final_solution.chosen == pred.final_solution.chosen
    ) and not pred.cleanup_used
    return ReplicationReport(
        max_err=err, steps_match=steps_match, solutions_equal=solutions_equal
    )
