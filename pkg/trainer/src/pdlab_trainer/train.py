"""Training loop: stepwise hint supervision plus optional optimal labels.

Each recurrent rollout is supervised against the recorded trajectory —
binary cross-entropy on inclusion flags, squared error on residuals and
dual increments (and the uniform increment when the rule is on) — and, when
enabled, the final decoded probabilities are additionally pulled toward the
exact optimum.  Noisy teacher forcing draws one coin per (graph, timestep):
heads feeds the recorded state into the next step, tails feeds the model's
own clamped predictions.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .model import GraphBatch, PrimalDualNet
from .records import TrainRecord

BCE_EPS = 1e-7


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 32
    hidden_dim: int = 32
    epochs: int = 100
    teacher_forcing_p: float = 0.5
    dropout: float = 0.0
    grad_clip: float = 1.0
    use_optimal: bool = True
    uniform: bool = False
    seed: int = 0


@dataclass
class StepTargets:
    """Ground-truth trajectories of one batch, padded to the longest run."""

    x: torch.Tensor        # (K_max, n)
    r: torch.Tensor        # (K_max, n)
    delta: torch.Tensor    # (K_max, m)
    Delta: torch.Tensor | None  # (K_max, G)
    steps_per_graph: torch.Tensor  # (G,)
    optimal_x: torch.Tensor | None  # (n,)

    @property
    def k_max(self) -> int:
        return self.x.shape[0]


def make_batch(records: list[TrainRecord], uniform: bool, with_optimal: bool):
    graph = GraphBatch.from_records(records)
    k_max = max((r.n_steps for r in records), default=0)
    n, m, G = graph.n_elements, graph.n_sets, graph.n_graphs
    x = torch.zeros(k_max, n)
    r = torch.zeros(k_max, n)
    delta = torch.zeros(k_max, m)
    Delta = torch.zeros(k_max, G) if uniform else None
    steps = torch.zeros(G, dtype=torch.long)
    opt = torch.zeros(n) if with_optimal else None
    for g, rec in enumerate(records):
        eo, so = graph.elem_offset[g], graph.set_offset[g]
        k = rec.n_steps
        steps[g] = k
        x[:k, eo : eo + rec.n_elements] = torch.from_numpy(rec.x)
        r[:k, eo : eo + rec.n_elements] = torch.from_numpy(rec.r)
        delta[:k, so : so + rec.n_sets] = torch.from_numpy(rec.delta)
        if k < k_max:  # frozen state past the end keeps dead graphs well-defined
            x[k:, eo : eo + rec.n_elements] = torch.from_numpy(rec.x[-1]) if k else 0.0
            r[k:, eo : eo + rec.n_elements] = torch.from_numpy(rec.r[-1]) if k else torch.from_numpy(
                rec.weights.astype(np.float32)
            )
        if uniform and rec.Delta is not None:
            Delta[:k, g] = torch.from_numpy(rec.Delta)
        if with_optimal:
            if rec.optimal_x is None:
                raise ValueError(f"{rec.instance_id}: optimal labels required but missing")
            opt[eo : eo + rec.n_elements] = torch.from_numpy(rec.optimal_x)
    targets = StepTargets(x=x, r=r, delta=delta, Delta=Delta, steps_per_graph=steps, optimal_x=opt)
    return graph, targets


def rollout_loss(
    model: PrimalDualNet,
    graph: GraphBatch,
    targets: StepTargets,
    teacher_forcing_p: float,
    rng: torch.Generator | None,
) -> tuple[torch.Tensor, dict]:
    """Loss of one supervised rollout over a batch.

    With rng=None the rollout is fully teacher-forced (deterministic), used
    for validation.
    """
    n, G = graph.n_elements, graph.n_graphs
    dt = next(model.parameters()).dtype
    w = graph.w.to(dt)
    chosen = torch.zeros(n, dtype=torch.bool)
    r_state = w.clone()
    final_prob = torch.zeros(n, dtype=dt)

    terms = {"x": [], "r": [], "delta": [], "Delta": []}
    for t in range(targets.k_max):
        live = t < targets.steps_per_graph
        if not live.any():
            break
        out = model.step(graph, r_state, chosen, live)
        ea, sa = out.element_active, out.set_active

        if ea.any():
            terms["x"].append(
                F.binary_cross_entropy_with_logits(out.x_logit[ea], targets.x[t][ea])
            )
            terms["r"].append(F.mse_loss(out.r_hat[ea], targets.r[t][ea]))
        if sa.any():
            terms["delta"].append(F.mse_loss(out.delta_hat[sa], targets.delta[t][sa]))
        if model.uniform and out.graph_has_active.any():
            ga = out.graph_has_active & live
            if ga.any():
                terms["Delta"].append(F.mse_loss(out.Delta_hat[ga], targets.Delta[t][ga]))

        prob = torch.sigmoid(out.x_logit)
        final_prob = torch.where(ea, prob, final_prob)

        # next-step state: ground truth vs the model's own predictions.
        # The floor keeps early-training feedback out of the log encoder's
        # extreme range; inference uses the plain [0, w] clamp.
        model_chosen = model.decode_selection(out, graph, chosen)
        model_r = torch.where(ea, torch.clamp(out.r_hat, min=1e-9), r_state)
        model_r = torch.minimum(model_r, w)
        if rng is None:
            use_gt = torch.ones(G, dtype=torch.bool)
        else:
            use_gt = torch.rand(G, generator=rng) < teacher_forcing_p
        use_gt_e = use_gt[graph.elem_graph] | ~live[graph.elem_graph]
        chosen = torch.where(use_gt_e, targets.x[t] > 0.5, model_chosen)
        r_state = torch.where(use_gt_e, targets.r[t], model_r)

    stacked = [torch.stack(v).mean() for v in terms.values() if v]
    loss = torch.stack(stacked).sum() if stacked else torch.zeros((), requires_grad=True)
    metrics = {k: float(torch.stack(v).mean().detach()) for k, v in terms.items() if v}

    if targets.optimal_x is not None:
        p = final_prob.clamp(BCE_EPS, 1 - BCE_EPS)
        opt_loss = F.binary_cross_entropy(p, targets.optimal_x)
        loss = loss + opt_loss
        metrics["optm"] = float(opt_loss.detach())
    return loss, metrics


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    seconds: float


def train(
    train_records: list[TrainRecord],
    val_records: list[TrainRecord],
    config: TrainConfig,
    out_path,
    metrics_path=None,
) -> PrimalDualNet:
    """Fit the network and write the best-validation weights file."""
    torch.manual_seed(config.seed)
    model = PrimalDualNet(config.hidden_dim, config.uniform, config.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(optimizer)

    batches = [
        make_batch(train_records[i : i + config.batch_size], config.uniform, config.use_optimal)
        for i in range(0, len(train_records), config.batch_size)
    ]
    val_batches = [
        make_batch(val_records[i : i + config.batch_size], config.uniform, config.use_optimal)
        for i in range(0, len(val_records), config.batch_size)
    ]
    rng = torch.Generator().manual_seed(config.seed)
    order_rng = np.random.default_rng(config.seed)

    best_val = math.inf
    logs: list[EpochLog] = []
    metrics_fh = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
    try:
        for epoch in range(config.epochs):
            t0 = time.monotonic()
            model.train()
            train_losses = []
            for bi in order_rng.permutation(len(batches)):
                graph, targets = batches[bi]
                optimizer.zero_grad()
                loss, _ = rollout_loss(model, graph, targets, config.teacher_forcing_p, rng)
                loss.backward()
                if config.grad_clip:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                optimizer.step()
                train_losses.append(float(loss.detach()))

            model.eval()
            with torch.no_grad():
                val_losses = [
                    float(rollout_loss(model, g, t, 1.0, None)[0]) for g, t in val_batches
                ]
            val_loss = float(np.mean(val_losses)) if val_losses else float(np.mean(train_losses))
            scheduler.step(val_loss)
            log = EpochLog(
                epoch=epoch,
                train_loss=float(np.mean(train_losses)),
                val_loss=val_loss,
                lr=optimizer.param_groups[0]["lr"],
                seconds=time.monotonic() - t0,
            )
            logs.append(log)
            if metrics_fh:
                metrics_fh.write(json.dumps(log.__dict__) + "\n")
                metrics_fh.flush()
            if val_loss < best_val:
                best_val = val_loss
                _atomic_export(model, out_path)
    finally:
        if metrics_fh:
            metrics_fh.close()
    model.epoch_logs = logs
    return model


def _atomic_export(model: PrimalDualNet, out_path) -> None:
    out_path = Path(out_path)
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    model.export_weights(tmp)
    tmp.replace(out_path)
