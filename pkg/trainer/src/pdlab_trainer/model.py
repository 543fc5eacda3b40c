"""Torch implementation of the bipartite primal-dual reasoning network.

One forward step mirrors the inference engine's numerics exactly: encode
log-residuals and log1p-degrees, message-MLP per incidence edge with min
aggregation into subset latents, optional virtual-node global min for the
uniform-increase rule, sum aggregation back, linear update, and four linear
decoders.  Parameters are stored with the exact tensor names and shapes of
the portable weights file, so export is a direct dump.

Batches are disjoint unions: all elements/subsets of a batch live in one big
bipartite graph with per-node graph ids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .records import TrainRecord

R_CLAMP = 1e-12
WEIGHTS_SCHEMA = "pdlab-weights v1"

INF = float("inf")


@dataclass
class GraphBatch:
    """Disjoint union of instance bipartite graphs."""

    n_elements: int
    n_sets: int
    n_graphs: int
    edge_elem: torch.Tensor   # (E,) element endpoint of each incidence
    edge_set: torch.Tensor    # (E,)
    elem_graph: torch.Tensor  # (n,)
    set_graph: torch.Tensor   # (m,)
    w: torch.Tensor           # (n,) element weights
    elem_offset: list[int]
    set_offset: list[int]

    @staticmethod
    def from_records(records: list[TrainRecord]) -> "GraphBatch":
        edge_elem, edge_set = [], []
        elem_graph, set_graph, w = [], [], []
        elem_offset, set_offset = [], []
        eo = so = 0
        for g, rec in enumerate(records):
            elem_offset.append(eo)
            set_offset.append(so)
            for j, members in enumerate(rec.sets):
                for e in members:
                    edge_elem.append(eo + e)
                    edge_set.append(so + j)
            elem_graph.extend([g] * rec.n_elements)
            set_graph.extend([g] * rec.n_sets)
            w.extend(rec.weights.tolist())
            eo += rec.n_elements
            so += rec.n_sets
        return GraphBatch(
            n_elements=eo,
            n_sets=so,
            n_graphs=len(records),
            edge_elem=torch.tensor(edge_elem, dtype=torch.long),
            edge_set=torch.tensor(edge_set, dtype=torch.long),
            elem_graph=torch.tensor(elem_graph, dtype=torch.long),
            set_graph=torch.tensor(set_graph, dtype=torch.long),
            w=torch.tensor(w, dtype=torch.float64),
            elem_offset=elem_offset,
            set_offset=set_offset,
        )


@dataclass
class StepOut:
    x_logit: torch.Tensor     # (n,) inclusion logits, valid on active elements
    r_hat: torch.Tensor       # (n,) residual predictions, valid on active elements
    delta_hat: torch.Tensor   # (m,) subset increments, 0 on inactive subsets
    Delta_hat: torch.Tensor | None  # (G,) uniform increments per graph
    element_active: torch.Tensor
    set_active: torch.Tensor
    graph_has_active: torch.Tensor  # (G,) graphs with >= 1 active subset


class PrimalDualNet(nn.Module):
    def __init__(self, hidden_dim: int = 32, uniform: bool = False, dropout: float = 0.0):
        super().__init__()
        h = hidden_dim
        self.hidden_dim = h
        self.uniform = uniform
        self.dropout = dropout
        self.temperature = 1.0
        self.decode_threshold = 0.5
        self.degree_transform = "log1p"

        def mat(rows, cols, scale=1.0):
            t = torch.empty(rows, cols)
            nn.init.kaiming_uniform_(t, a=5 ** 0.5)  # nn.Linear default
            return nn.Parameter(t * scale)

        def vec(k):
            return nn.Parameter(torch.zeros(k))

        self.f_r_w = mat(h, 1)
        self.f_r_b = vec(h)
        self.f_d_w = mat(h, 1)
        self.f_d_b = vec(h)
        self.g_e_w1 = mat(h, 2 * h)
        self.g_e_b1 = vec(h)
        self.g_e_w2 = mat(h, h)
        self.g_e_b2 = vec(h)
        self.g_u_pre_b = vec(h)
        self.g_u_w = mat(h, 2 * h)
        self.g_u_b = vec(h)
        # small decoder init keeps first predictions near the data scale
        self.q_x_w = mat(1, h, scale=0.1)
        self.q_x_b = vec(1)
        self.q_r_w = mat(1, h, scale=0.1)
        self.q_r_b = vec(1)
        self.q_delta_w = mat(1, h, scale=0.1)
        self.q_delta_b = vec(1)
        if uniform:
            self.q_Delta_w = mat(1, h, scale=0.1)
            self.q_Delta_b = vec(1)

    def step(self, batch: GraphBatch, r: torch.Tensor, chosen: torch.Tensor,
             live: torch.Tensor) -> StepOut:
        """One message-passing round over the active part of the batch.

        r      : (n,) residual inputs
        chosen : (n,) bool, elements already committed
        live   : (G,) bool, graphs still rolling
        """
        n, m, G = batch.n_elements, batch.n_sets, batch.n_graphs
        h = self.hidden_dim
        dt = self.f_r_w.dtype
        ee, es = batch.edge_elem, batch.edge_set

        element_active = (~chosen) & live[batch.elem_graph]
        hit = torch.zeros(m, dtype=torch.bool)
        chosen_edge = chosen[ee]
        if chosen_edge.any():
            hit[es[chosen_edge]] = True
        set_active = (~hit) & live[batch.set_graph]
        edge_on = element_active[ee] & set_active[es]

        deg = torch.zeros(n, dtype=dt)
        deg.index_add_(0, ee[edge_on], torch.ones(int(edge_on.sum()), dtype=dt))
        log_r = torch.log(torch.clamp(r.to(dt), min=R_CLAMP))
        if self.degree_transform == "log":
            log_d = torch.log(torch.clamp(deg, min=1.0))
        else:
            log_d = torch.log1p(deg)

        h_e = log_r.unsqueeze(1) * self.f_r_w.T + self.f_r_b
        h_d = log_d.unsqueeze(1) * self.f_d_w.T + self.f_d_b

        je = ee[edge_on]
        js = es[edge_on]
        z = torch.cat([h_e[je], h_d[je]], dim=1)
        hid = F.elu(z @ self.g_e_w1.T + self.g_e_b1)
        if self.dropout > 0:
            hid = F.dropout(hid, self.dropout, self.training)
        msg = hid @ self.g_e_w2.T + self.g_e_b2

        h_t = torch.full((m, h), INF, dtype=dt)
        h_t = h_t.scatter_reduce(0, js.unsqueeze(1).expand(-1, h), msg, reduce="amin")
        h_t = torch.where(set_active.unsqueeze(1), h_t, torch.zeros((), dtype=dt))

        delta_hat = (h_t @ self.q_delta_w.T + self.q_delta_b)[:, 0]
        delta_hat = torch.where(set_active, delta_hat, torch.zeros((), dtype=dt))

        graph_has_active = torch.zeros(G, dtype=torch.bool)
        graph_has_active[batch.set_graph[set_active]] = True

        if self.uniform:
            h_zg = torch.full((G, h), INF, dtype=dt)
            act_idx = set_active.nonzero(as_tuple=True)[0]
            h_zg = h_zg.scatter_reduce(
                0, batch.set_graph[act_idx].unsqueeze(1).expand(-1, h), h_t[act_idx], reduce="amin"
            )
            h_zg = torch.where(graph_has_active.unsqueeze(1), h_zg, torch.zeros((), dtype=dt))
            Delta_hat = (h_zg @ self.q_Delta_w.T + self.q_Delta_b)[:, 0]
            h_t_eff = h_zg[batch.set_graph]
            h_t_eff = torch.where(set_active.unsqueeze(1), h_t_eff, torch.zeros((), dtype=dt))
        else:
            Delta_hat = None
            h_t_eff = h_t

        msum = torch.zeros(n, h, dtype=dt)
        msum.index_add_(0, je, h_t_eff[js])
        if self.dropout > 0:
            msum = F.dropout(msum, self.dropout, self.training)

        pre = F.elu(h_e) + self.g_u_pre_b
        u = torch.cat([pre, msum], dim=1)
        h_new = u @ self.g_u_w.T + self.g_u_b

        r_hat = (h_new @ self.q_r_w.T + self.q_r_b)[:, 0]
        x_logit = self.temperature * (h_new @ self.q_x_w.T + self.q_x_b)[:, 0]
        return StepOut(
            x_logit=x_logit,
            r_hat=r_hat,
            delta_hat=delta_hat,
            Delta_hat=Delta_hat,
            element_active=element_active,
            set_active=set_active,
            graph_has_active=graph_has_active,
        )

    def decode_selection(self, out: StepOut, batch: GraphBatch, chosen: torch.Tensor) -> torch.Tensor:
        """Mask update rule: threshold for the plain architecture, one best
        element per live graph under the uniform rule."""
        prob = torch.sigmoid(out.x_logit)
        newly = torch.zeros_like(chosen)
        if self.uniform:
            score = torch.where(out.element_active, prob, torch.full_like(prob, -1.0))
            for g in range(batch.n_graphs):
                if not out.graph_has_active[g]:
                    continue
                lo = batch.elem_offset[g]
                hi = batch.elem_offset[g + 1] if g + 1 < batch.n_graphs else batch.n_elements
                local = score[lo:hi]
                if (local >= 0).any():
                    newly[lo + int(torch.argmax(local))] = True
        else:
            newly = out.element_active & (prob >= self.decode_threshold)
        return chosen | newly

    # -- portable weights file ------------------------------------------------

    TENSOR_NAMES = [
        ("f_r.w", "f_r_w"), ("f_r.b", "f_r_b"),
        ("f_d.w", "f_d_w"), ("f_d.b", "f_d_b"),
        ("g_e.w1", "g_e_w1"), ("g_e.b1", "g_e_b1"),
        ("g_e.w2", "g_e_w2"), ("g_e.b2", "g_e_b2"),
        ("g_u.pre_b", "g_u_pre_b"),
        ("g_u.w", "g_u_w"), ("g_u.b", "g_u_b"),
        ("q_x.w", "q_x_w"), ("q_x.b", "q_x_b"),
        ("q_r.w", "q_r_w"), ("q_r.b", "q_r_b"),
        ("q_delta.w", "q_delta_w"), ("q_delta.b", "q_delta_b"),
        ("q_Delta.w", "q_Delta_w"), ("q_Delta.b", "q_Delta_b"),
    ]

    def export_weights(self, path) -> None:
        lines = [
            WEIGHTS_SCHEMA,
            f"hidden_dim {self.hidden_dim}",
            f"uniform {'true' if self.uniform else 'false'}",
            "activation elu",
            f"degree_transform {self.degree_transform}",
            f"decode_threshold {self.decode_threshold!r}",
            f"temperature {self.temperature!r}",
        ]
        for file_name, attr in self.TENSOR_NAMES:
            if not hasattr(self, attr):
                continue
            tensor = getattr(self, attr).detach().double().numpy()
            dims = " ".join(str(d) for d in tensor.shape)
            lines.append(f"tensor {file_name} {dims}")
            rows = tensor.reshape(tensor.shape[0], -1) if tensor.ndim > 1 else tensor[None, :]
            for row in rows:
                lines.append(" ".join(repr(float(v)) for v in row))
        lines.append("end")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def load_weights_file(self, path) -> None:
        """Load a portable weights file into this module (shapes must match)."""
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != WEIGHTS_SCHEMA:
            raise ValueError(f"{path}: expected header {WEIGHTS_SCHEMA!r}")
        i = 1
        header = {}
        while i < len(lines) and not lines[i].startswith("tensor "):
            if lines[i].strip() and lines[i] != "end":
                key, value = lines[i].split(maxsplit=1)
                header[key] = value
            i += 1
        if int(header["hidden_dim"]) != self.hidden_dim:
            raise ValueError("hidden_dim mismatch")
        if (header["uniform"] == "true") != self.uniform:
            raise ValueError("uniform flag mismatch")
        self.temperature = float(header.get("temperature", "1.0"))
        self.decode_threshold = float(header.get("decode_threshold", "0.5"))
        self.degree_transform = header.get("degree_transform", "log1p")
        if self.degree_transform not in ("log", "log1p"):
            raise ValueError(f"unknown degree transform {self.degree_transform!r}")
        by_name = dict(self.TENSOR_NAMES)
        with torch.no_grad():
            while i < len(lines):
                line = lines[i].strip()
                if not line or line == "end":
                    i += 1
                    continue
                parts = line.split()
                name = parts[1]
                shape = tuple(int(d) for d in parts[2:])
                n_rows = shape[0] if len(shape) > 1 else 1
                values = [[float(v) for v in lines[i + 1 + k].split()] for k in range(n_rows)]
                tensor = torch.tensor(np.asarray(values, dtype=np.float64).reshape(shape), dtype=torch.float32)
                getattr(self, by_name[name]).copy_(tensor)
                i += 1 + n_rows
