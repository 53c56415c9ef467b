"""Standard and randomized graphs used by the experiments and tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import conditions as cnd
from .graph import Edge, MetricGraph, PiecewisePotential, Vertex


def interval(length: float = 1.0, left=cnd.DIRICHLET, right=cnd.DIRICHLET, potential=None) -> MetricGraph:
    """Single edge ``e1`` from ``a`` (x = 0) to ``b``."""
    return MetricGraph(
        [Vertex("a", left), Vertex("b", right)],
        [Edge("e1", "a", "b", float(length), potential)],
    )


def star(lengths: Sequence[float], center=cnd.NEUMANN, leaf=cnd.DIRICHLET) -> MetricGraph:
    """Star with center ``c``, leaves ``l1..``, edges ``e1..`` pointing outward."""
    vs = [Vertex("c", center)] + [Vertex(f"l{i + 1}", leaf) for i in range(len(lengths))]
    es = [Edge(f"e{i + 1}", "c", f"l{i + 1}", float(L)) for i, L in enumerate(lengths)]
    return MetricGraph(vs, es)


def loop(length: float = 1.0, condition=cnd.NEUMANN) -> MetricGraph:
    return MetricGraph([Vertex("a", condition)], [Edge("e1", "a", "a", float(length))])


def _random_potential(rng: np.random.Generator, length: float, scale: float) -> PiecewisePotential:
    if scale == 0 or rng.random() < 0.5:
        return PiecewisePotential.constant(length, 0.0)
    n = int(rng.integers(1, 3))
    cuts = np.sort(rng.uniform(0.2, 0.8, n - 1)) * length if n > 1 else np.zeros(0)
    bps = np.concatenate([[0.0], cuts, [length]])
    return PiecewisePotential(tuple(bps), tuple(rng.uniform(-scale, scale, n)))


def random_graph(
    rng: np.random.Generator,
    max_vertices: int = 5,
    max_edges: int = 6,
    alpha_range: tuple[float, float] = (-2.0, 2.0),
    length_range: tuple[float, float] = (0.5, 2.0),
    potential_scale: float = 0.0,
    loops: bool = False,
) -> MetricGraph:
    """Connected graph with delta conditions (alpha drawn uniformly).

    A random spanning tree is completed by extra (possibly parallel) edges.
    """
    nv = int(rng.integers(2, max_vertices + 1))
    ne = int(rng.integers(nv - 1, max(nv - 1, max_edges) + 1))
    pairs = []
    order = rng.permutation(nv)
    for k in range(1, nv):
        pairs.append((int(order[int(rng.integers(0, k))]), int(order[k])))
    while len(pairs) < ne:
        u, w = (int(x) for x in rng.integers(0, nv, 2))
        if u == w and not loops:
            continue
        pairs.append((u, w))
    vs = [Vertex(f"v{i}", cnd.Delta(float(rng.uniform(*alpha_range)))) for i in range(nv)]
    es = []
    for k, (u, w) in enumerate(pairs):
        L = float(rng.uniform(*length_range))
        es.append(Edge(f"e{k}", f"v{u}", f"v{w}", L, _random_potential(rng, L, potential_scale)))
    return MetricGraph(vs, es)


def random_tree(
    rng: np.random.Generator,
    max_leaves: int = 6,
    length_range: tuple[float, float] = (0.6, 1.6),
    internal_alpha: tuple[float, float] = (0.0, 0.0),
    leaf_conditions: Sequence | None = None,
    potential_scale: float = 0.0,
) -> MetricGraph:
    """Random tree with 2..``max_leaves`` leaves and no vertices of degree 2.

    Lengths are drawn from a continuous distribution, so rational length
    ratios occur with probability zero.  Leaves are Dirichlet unless a
    list of leaf conditions to draw from is given.
    """
    n_leaves = int(rng.integers(2, max_leaves + 1))
    # grow by attaching new leaves to edges or to internal vertices
    adj: dict[int, set[int]] = {0: {1}, 1: {0}}
    nxt = 2
    while sum(1 for v in adj if len(adj[v]) == 1) < n_leaves:
        internals = [v for v in adj if len(adj[v]) > 1]
        if internals and rng.random() < 0.4:
            v = int(rng.choice(internals))
        else:
            # subdivide a random edge with a new internal vertex
            a = int(rng.choice(list(adj)))
            b = int(rng.choice(sorted(adj[a])))
            v = nxt
            nxt += 1
            adj[a].discard(b)
            adj[b].discard(a)
            adj[v] = {a, b}
            adj[a].add(v)
            adj[b].add(v)
        leaf = nxt
        nxt += 1
        adj[leaf] = {v}
        adj[v].add(leaf)
    vs = []
    for v in sorted(adj):
        if len(adj[v]) == 1:
            cond = cnd.DIRICHLET if not leaf_conditions else leaf_conditions[int(rng.integers(len(leaf_conditions)))]
        else:
            lo, hi = internal_alpha
            cond = cnd.Delta(float(rng.uniform(lo, hi)) if hi > lo else float(lo))
        vs.append(Vertex(f"v{v}", cond))
    es = []
    k = 0
    for a in sorted(adj):
        for b in sorted(adj[a]):
            if a < b:
                L = float(rng.uniform(*length_range))
                es.append(Edge(f"e{k}", f"v{a}", f"v{b}", L, _random_potential(rng, L, potential_scale)))
                k += 1
    return MetricGraph(vs, es)


def disjoint_union(*graphs: MetricGraph, prefixes: Sequence[str] | None = None) -> MetricGraph:
    """Disjoint union with ids prefixed ``g0.``, ``g1.`` ... (or the given prefixes)."""
    prefixes = prefixes or [f"g{i}." for i in range(len(graphs))]
    vs, es = [], []
    for p, g in zip(prefixes, graphs):
        vs.extend(Vertex(p + v.id, v.condition) for v in g.vertices)
        es.extend(Edge(p + e.id, p + e.u, p + e.w, e.length, e.potential, e.coefficient) for e in g.edges)
    return MetricGraph(vs, es)
