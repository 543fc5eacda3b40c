"""Seeded random graph families used to build benchmark instances.

All generators are pure functions of their arguments: the stream is PCG64
seeded from a ``numpy.random.SeedSequence``, so identical inputs give
identical graphs on every platform.  Callers that need many independent
graphs derive per-graph seeds with ``SeedSequence(entropy=seed,
spawn_key=(index,))`` rather than sharing one stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import networkx as nx
import numpy as np

__all__ = [
    "Graph",
    "BipartiteGraph",
    "GenSpec",
    "gen_ba",
    "gen_ba_bipartite",
    "gen_er",
    "gen_star",
    "gen_lobster",
    "gen_3con_planar",
    "sample_weights",
    "generate_graph",
    "is_connected",
    "is_planar",
    "has_vertex_connectivity_3",
    "FAMILIES",
]

FAMILIES = ("ba", "ba_bipartite", "er", "star", "lobster", "triconn_planar")


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph: ``n`` nodes, sorted deduplicated edge tuples."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def to_networkx(self) -> "nx.Graph":
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph stored as the LHS-neighbor sets of each RHS node."""

    n_lhs: int
    n_rhs: int
    rhs_neighbors: tuple[tuple[int, ...], ...]

    def lhs_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_lhs, dtype=np.int64)
        for nbrs in self.rhs_neighbors:
            deg[list(nbrs)] += 1
        return deg


@dataclass(frozen=True)
class GenSpec:
    """A (family, size, params, seed) tuple naming one random graph."""

    family: str
    n: int
    params: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 2:
            raise ValueError("need at least 2 nodes")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def _dedup_edges(edges) -> tuple[tuple[int, int], ...]:
    canon = {(min(u, v), max(u, v)) for u, v in edges}
    return tuple(sorted(canon))


def gen_ba(n: int, attach_lo: int, attach_hi: int, seed) -> Graph:
    """Barabási-Albert preferential attachment.

    The per-graph attachment count m is drawn uniformly from
    [attach_lo, attach_hi]; the graph starts from a clique on m nodes and
    every later node attaches to m distinct existing nodes sampled
    proportionally to degree (uniformly while all degrees are zero).
    """
    if not (1 <= attach_lo <= attach_hi < n):
        raise ValueError(f"need 1 <= attach_lo <= attach_hi < n, got [{attach_lo}, {attach_hi}] for n={n}")
    rng = _rng(seed)
    m = int(rng.integers(attach_lo, attach_hi + 1))
    edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    # One entry per degree unit; uniform picks from it are degree-proportional.
    repeated: list[int] = [v for v in range(m) for _ in range(m - 1)]
    for new in range(m, n):
        targets: set[int] = set()
        while len(targets) < m:
            if repeated:
                targets.add(repeated[int(rng.integers(len(repeated)))])
            else:
                targets.add(int(rng.integers(new)))
        for t in sorted(targets):
            edges.append((t, new))
            repeated.append(t)
        repeated.extend([new] * m)
    return Graph(n=n, edges=_dedup_edges(edges))


def gen_ba_bipartite(n_lhs: int, m_rhs: int, b: int, seed) -> BipartiteGraph:
    """Preferential-attachment bipartite graph.

    Every RHS node picks exactly ``b`` distinct LHS neighbors, one draw at a
    time with probability proportional to degree(v) + 1.  The +1 smoothing
    makes the all-zero start uniform and lets the support grow past the
    first b nodes; LHS nodes may still end up isolated.
    """
    if not (1 <= b <= n_lhs):
        raise ValueError(f"need 1 <= b <= n_lhs, got b={b}, n_lhs={n_lhs}")
    rng = _rng(seed)
    degree = np.zeros(n_lhs, dtype=np.float64)
    rhs_sets: list[tuple[int, ...]] = []
    for _ in range(m_rhs):
        available = np.ones(n_lhs, dtype=bool)
        picked: list[int] = []
        for _ in range(b):
            weights = (degree + 1.0) * available
            p = weights / weights.sum()
            v = int(rng.choice(n_lhs, p=p))
            picked.append(v)
            available[v] = False
        for v in picked:
            degree[v] += 1
        rhs_sets.append(tuple(sorted(picked)))
    return BipartiteGraph(n_lhs=n_lhs, n_rhs=m_rhs, rhs_neighbors=tuple(rhs_sets))


def gen_er(n: int, p_lo: float, p_hi: float, seed) -> Graph:
    """Erdős–Rényi G(n, p) with p drawn uniformly from [p_lo, p_hi].

    Pass p_lo == p_hi to pin p for tests.
    """
    if not (0.0 <= p_lo <= p_hi <= 1.0):
        raise ValueError(f"need 0 <= p_lo <= p_hi <= 1, got [{p_lo}, {p_hi}]")
    rng = _rng(seed)
    p = float(rng.uniform(p_lo, p_hi))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    edges = tuple(zip(iu[keep].tolist(), ju[keep].tolist()))
    return Graph(n=n, edges=_dedup_edges(edges))


def _star_with_parts(n: int, seed, n_partitions: int | None = None):
    rng = _rng(seed)
    k = n_partitions if n_partitions is not None else int(rng.integers(1, 6))
    k = max(1, min(k, n))
    order = rng.permutation(n)
    cuts = sorted(rng.choice(np.arange(1, n), size=k - 1, replace=False).tolist()) if k > 1 else []
    bounds = [0] + cuts + [n]
    groups = [order[bounds[i] : bounds[i + 1]].tolist() for i in range(k)]

    edges: list[tuple[int, int]] = []
    for grp in groups:
        center = grp[0]
        edges.extend((center, other) for other in grp[1:])
    prior: list[int] = list(groups[0])
    for grp in groups[1:]:
        u = grp[int(rng.integers(len(grp)))]
        v = prior[int(rng.integers(len(prior)))]
        edges.append((u, v))
        prior.extend(grp)
    return Graph(n=n, edges=_dedup_edges(edges)), groups


def gen_star(n: int, seed, n_partitions: int | None = None) -> Graph:
    """Union of 1 to 5 star graphs joined into one connected component.

    Nodes are split into k random non-empty groups, each group forms a star
    around its first node, and k-1 bridge edges (one from every later group
    to a random node of the earlier groups) make the result connected.
    """
    graph, _ = _star_with_parts(n, seed, n_partitions)
    return graph


def _lobster_with_parts(n: int, seed, backbone: int | None = None):
    rng = _rng(seed)
    m = backbone if backbone is not None else int(rng.integers(1, n))
    if not (1 <= m <= n - 1):
        raise ValueError(f"backbone length must be in [1, n-1], got {m}")
    k = int(rng.integers(1, n - m + 1))
    edges = [(i, i + 1) for i in range(m - 1)]
    for branch in range(m, m + k):
        edges.append((int(rng.integers(m)), branch))
    for leaf in range(m + k, n):
        edges.append((m + int(rng.integers(k)), leaf))
    return Graph(n=n, edges=_dedup_edges(edges)), m, k


def gen_lobster(n: int, seed, backbone: int | None = None) -> Graph:
    """Lobster tree: a backbone path, branch nodes on the backbone, and the
    remaining nodes attached to branches (everything within distance 2 of
    the path).  Always a tree on n nodes.
    """
    graph, _, _ = _lobster_with_parts(n, seed, backbone)
    return graph


def _random_cubic(n: int, rng: np.random.Generator, max_tries: int = 1000) -> Graph | None:
    """Configuration-model 3-regular graph, rejecting loops and multi-edges."""
    stubs = np.repeat(np.arange(n), 3)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        edges = {(min(u, v), max(u, v)) for u, v in pairs.tolist()}
        if len(edges) != len(pairs) or any(u == v for u, v in edges):
            continue
        return Graph(n=n, edges=tuple(sorted(edges)))
    return None


def gen_3con_planar(n: int, seed, max_attempts: int = 100) -> Graph | None:
    """Random 3-regular graph that is both planar and 3-connected.

    Samples up to ``max_attempts`` cubic graphs and returns the first one
    passing both checks, or ``None`` — for larger n random cubic graphs are
    almost never planar, hence the optional result.
    """
    if n < 4 or n % 2 != 0:
        raise ValueError("3-regular graphs need an even node count >= 4")
    rng = _rng(seed)
    for _ in range(max_attempts):
        g = _random_cubic(n, rng)
        if g is None:
            continue
        if is_planar(g) and has_vertex_connectivity_3(g):
            return g
    return None


def sample_weights(n: int, seed) -> np.ndarray:
    """n element weights drawn uniformly from [0, 1)."""
    return _rng(seed).random(n)


def generate_graph(spec: GenSpec):
    """Dispatch a GenSpec to its family generator.

    Families default to the benchmark parameters: attachment range [1, 10]
    for ba, edge probability range [0.2, 0.8] for er, and b = 5 with an
    equal-sized RHS for ba_bipartite.
    """
    p = dict(spec.params)
    if spec.family == "ba":
        return gen_ba(spec.n, int(p.get("attach_lo", 1)), int(p.get("attach_hi", min(10, spec.n - 1))), spec.seed)
    if spec.family == "ba_bipartite":
        return gen_ba_bipartite(spec.n, int(p.get("m_rhs", spec.n)), int(p.get("b", 5)), spec.seed)
    if spec.family == "er":
        return gen_er(spec.n, float(p.get("p_lo", 0.2)), float(p.get("p_hi", 0.8)), spec.seed)
    if spec.family == "star":
        return gen_star(spec.n, spec.seed)
    if spec.family == "lobster":
        return gen_lobster(spec.n, spec.seed)
    if spec.family == "triconn_planar":
        return gen_3con_planar(spec.n, spec.seed)
    raise ValueError(f"unknown family {spec.family!r}")


def is_connected(graph: Graph) -> bool:
    if graph.n == 0:
        return True
    adj = [[] for _ in range(graph.n)]
    for u, v in graph.edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = np.zeros(graph.n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return bool(seen.all())


def is_planar(graph: Graph) -> bool:
    """Planarity via the left-right criterion (networkx implementation)."""
    ok, _ = nx.check_planarity(graph.to_networkx(), counterexample=False)
    return bool(ok)


def has_vertex_connectivity_3(graph: Graph) -> bool:
    """True iff no vertex set of size <= 2 disconnects the graph.

    Certified exhaustive removal check for n <= 64.  Beyond that the graph
    must be 3-regular, where vertex and edge connectivity coincide, and edge
    connectivity is measured with unit-capacity max-flow from node 0.
    """
    n = graph.n
    if n < 4:
        return False
    if not is_connected(graph):
        return False
    if n <= 64:
        nodes = range(n)
        for u in nodes:
            if not _connected_without(graph, {u}):
                return False
        for u in nodes:
            for v in range(u + 1, n):
                if not _connected_without(graph, {u, v}):
                    return False
        return True
    if not (graph.degrees() == 3).all():
        raise ValueError("fast connectivity path requires a 3-regular graph")
    return _edge_connectivity_at_least(graph, 3)


def _connected_without(graph: Graph, removed: set[int]) -> bool:
    remaining = [v for v in range(graph.n) if v not in removed]
    if not remaining:
        return True
    adj = [[] for _ in range(graph.n)]
    for u, v in graph.edges:
        if u not in removed and v not in removed:
            adj[u].append(v)
            adj[v].append(u)
    seen = {remaining[0]}
    stack = [remaining[0]]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(remaining)


def _edge_connectivity_at_least(graph: Graph, k: int) -> bool:
    """Min-cut(0, t) >= k for all t, via BFS augmenting paths capped at k."""
    n = graph.n
    adj = [dict() for _ in range(n)]
    for u, v in graph.edges:
        adj[u][v] = 1
        adj[v][u] = 1
    for t in range(1, n):
        cap = [d.copy() for d in adj]
        flow = 0
        while flow < k:
            parent = [-1] * n
            parent[0] = 0
            queue = [0]
            while queue and parent[t] == -1:
                u = queue.pop(0)
                for v, c in cap[u].items():
                    if c > 0 and parent[v] == -1:
                        parent[v] = u
                        queue.append(v)
            if parent[t] == -1:
                break
            v = t
            while v != 0:
                u = parent[v]
                cap[u][v] -= 1
                cap[v][u] = cap[v].get(u, 0) + 1
                v = u
            flow += 1
        if flow < k:
            return False
    return True
