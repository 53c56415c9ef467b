"""Metric graphs with per-vertex conditions, and structural surgery.

Each edge carries a coordinate ``x in [0, L]`` with ``x = 0`` at its first
endpoint ``u``.  Incident edge ends of a vertex are ordered by edge
position in the graph, then by endpoint role (the ``x = 0`` end first), so
trace vectors are reproducible.  A self-loop contributes both of its ends.

Edges may carry a positive ``coefficient`` ``c`` so that the operator on
the edge is ``-c f'' + V f``; this only arises from :func:`rescale`.  On
such edges the vertex conditions act on the raw derivative ``f'`` while
self-adjointness is checked on the flux ``sqrt(c) f'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import conditions as cnd
from .conditions import INFINITY, Delta, GeneralAB
from .errors import StructuralError, UnsupportedSurgery


@dataclass(frozen=True)
class PiecewisePotential:
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) < 2 or len(vals) != len(bp) - 1:
            raise StructuralError("E_POTENTIAL", "need n+1 breakpoints for n potential values")
        if bp[0] != 0.0:
            raise StructuralError("E_POTENTIAL", "first breakpoint must be 0")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise StructuralError("E_POTENTIAL", "breakpoints must be strictly ascending")
        if not all(math.isfinite(v) for v in vals):
            raise StructuralError("E_POTENTIAL", "potential values must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, length: float, value: float = 0.0) -> "PiecewisePotential":
        return cls((0.0, float(length)), (float(value),))

    @property
    def length(self) -> float:
        return self.breakpoints[-1]

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def pieces(self) -> list[tuple[float, float, float]]:
        """``(x0, x1, V)`` for each constant piece."""
        bp = self.breakpoints
        return [(bp[i], bp[i + 1], self.values[i]) for i in range(len(self.values))]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    def stretched(self, factor: float) -> "PiecewisePotential":
        return PiecewisePotential(tuple(b * factor for b in self.breakpoints), self.values)

    def reversed(self) -> "PiecewisePotential":
        L = self.length
        bp = tuple(L - b for b in reversed(self.breakpoints))
        return PiecewisePotential((0.0,) + bp[1:-1] + (L,), tuple(reversed(self.values)))

    def resized(self, new_length: float, at_end: bool = True) -> "PiecewisePotential":
        """Shift the edge end by ``new_length - L``; the outermost piece absorbs it."""
        delta = new_length - self.length
        bp = list(self.breakpoints)
        if at_end:
            bp[-1] = new_length
        else:
            bp = [0.0] + [b + delta for b in bp[1:]]
        return PiecewisePotential(tuple(bp), self.values)


@dataclass(frozen=True)
class Edge:
    id: str
    u: str
    w: str
    length: float
    potential: PiecewisePotential | None = None
    coefficient: float = 1.0

    def __post_init__(self):
        L = float(self.length)
        if not math.isfinite(L) or L <= 0:
            raise StructuralError("E_NONPOSITIVE_LENGTH", f"edge {self.id}: length must be finite and > 0, got {self.length}")
        object.__setattr__(self, "length", L)
        c = float(self.coefficient)
        if not math.isfinite(c) or c <= 0:
            raise StructuralError("E_COEFFICIENT", f"edge {self.id}: coefficient must be > 0")
        object.__setattr__(self, "coefficient", c)
        pot = self.potential
        if pot is None:
            pot = PiecewisePotential.constant(L)
        elif not math.isclose(pot.length, L, rel_tol=1e-12, abs_tol=1e-14):
            raise StructuralError("E_POTENTIAL", f"edge {self.id}: potential covers [0, {pot.length}], edge length is {L}")
        elif pot.length != L:
            pot = PiecewisePotential(pot.breakpoints[:-1] + (L,), pot.values)
        object.__setattr__(self, "potential", pot)

    @property
    def is_loop(self) -> bool:
        return self.u == self.w

    @property
    def effective_length(self) -> float:
        return self.length / math.sqrt(self.coefficient)


@dataclass(frozen=True)
class Vertex:
    id: str
    condition: cnd.VertexCondition = field(default_factory=lambda: Delta(0.0))


@dataclass(frozen=True)
class End:
    """One edge end at a vertex: ``role`` 0 is ``x = 0``, 1 is ``x = L``."""

    edge_index: int
    role: int

    @property
    def slot(self) -> int:
        return 2 * self.edge_index + self.role


class MetricGraph:
    """Immutable metric graph.  Construction validates every invariant."""

    def __init__(self, vertices: Iterable[Vertex], edges: Iterable[Edge], *, validate: bool = True):
        self._vertices = tuple(vertices)
        self._edges = tuple(edges)
        self._vindex: dict[str, int] = {}
        for i, v in enumerate(self._vertices):
            if v.id in self._vindex:
                raise StructuralError("E_DUPLICATE_ID", f"duplicate vertex id {v.id!r}")
            self._vindex[v.id] = i
        self._eindex: dict[str, int] = {}
        for i, e in enumerate(self._edges):
            if e.id in self._eindex:
                raise StructuralError("E_DUPLICATE_ID", f"duplicate edge id {e.id!r}")
            self._eindex[e.id] = i
            for end in (e.u, e.w):
                if end not in self._vindex:
                    raise StructuralError("E_DANGLING_ENDPOINT", f"edge {e.id!r} references unknown vertex {end!r}")
        ends: dict[str, list[End]] = {v.id: [] for v in self._vertices}
        for i, e in enumerate(self._edges):
            ends[e.u].append(End(i, 0))
            ends[e.w].append(End(i, 1))
        self._ends = {k: tuple(v) for k, v in ends.items()}
        for v in self._vertices:
            d = len(self._ends[v.id])
            if d == 0:
                raise StructuralError("E_ISOLATED_VERTEX", f"vertex {v.id!r} has no incident edges")
            dim = getattr(v.condition, "dimension", None)
            if dim is not None and dim != d:
                raise StructuralError(
                    "E_DEGREE_MISMATCH", f"vertex {v.id!r}: condition dimension {dim} != degree {d}"
                )
        if validate:
            for v in self._vertices:
                rep = cnd.validate_condition(self.flux_condition(v.id), self.degree(v.id))
                if not rep.passed:
                    raise StructuralError("E_INVALID_CONDITION", f"vertex {v.id!r}: " + "; ".join(rep.messages))

    # -- access -------------------------------------------------------------

    @property
    def vertices(self) -> tuple[Vertex, ...]:
        return self._vertices

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def vertex_ids(self) -> list[str]:
        return [v.id for v in self._vertices]

    @property
    def edge_ids(self) -> list[str]:
        return [e.id for e in self._edges]

    def vertex(self, vid: str) -> Vertex:
        try:
            return self._vertices[self._vindex[vid]]
        except KeyError:
            raise StructuralError("E_UNKNOWN_VERTEX", f"no vertex {vid!r}") from None

    def edge(self, eid: str) -> Edge:
        try:
            return self._edges[self._eindex[eid]]
        except KeyError:
            raise StructuralError("E_UNKNOWN_EDGE", f"no edge {eid!r}") from None

    def vertex_index(self, vid: str) -> int:
        self.vertex(vid)
        return self._vindex[vid]

    def edge_index(self, eid: str) -> int:
        self.edge(eid)
        return self._eindex[eid]

    def ends(self, vid: str) -> tuple[End, ...]:
        self.vertex(vid)
        return self._ends[vid]

    def degree(self, vid: str) -> int:
        return len(self.ends(vid))

    def condition(self, vid: str):
        return self.vertex(vid).condition

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self._edges))

    @property
    def effective_length(self) -> float:
        """Sum of ``L_e / sqrt(c_e)``: the length entering the Weyl law."""
        return float(sum(e.effective_length for e in self._edges))

    def __repr__(self) -> str:
        return f"MetricGraph({len(self._vertices)} vertices, {len(self._edges)} edges, L={self.total_length:.6g})"

    # -- condition forms ----------------------------------------------------

    def ab(self, vid: str) -> GeneralAB:
        """The raw-derivative condition of ``vid`` as (A, B)."""
        return cnd.as_ab(self.condition(vid), self.degree(vid))

    def _end_coefficients(self, vid: str) -> np.ndarray:
        return np.array([self._edges[e.edge_index].coefficient for e in self.ends(vid)])

    def flux_condition(self, vid: str) -> GeneralAB:
        """The condition with respect to the flux ``sqrt(c) f'``."""
        ab = self.ab(vid)
        c = self._end_coefficients(vid)
        if np.all(c == 1.0):
            return ab
        return GeneralAB(ab.A, ab.B / np.sqrt(c)[None, :])

    @cached_property
    def is_real(self) -> bool:
        return all(self.ab(v.id).is_real for v in self._vertices)

    @cached_property
    def has_uniform_coefficients(self) -> bool:
        return all(e.coefficient == 1.0 for e in self._edges)

    # -- structure ------------------------------------------------------------

    def adjacency(self) -> dict[str, list[tuple[str, str]]]:
        adj: dict[str, list[tuple[str, str]]] = {v.id: [] for v in self._vertices}
        for e in self._edges:
            adj[e.u].append((e.w, e.id))
            if not e.is_loop:
                adj[e.w].append((e.u, e.id))
        return adj

    def components(self) -> list[list[str]]:
        adj = self.adjacency()
        seen: set[str] = set()
        comps = []
        for v in self.vertex_ids:
            if v in seen:
                continue
            stack = [v]
            comp = []
            seen.add(v)
            while stack:
                x = stack.pop()
                comp.append(x)
                for y, _ in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            comps.append(comp)
        return comps

    def is_tree(self) -> bool:
        if any(e.is_loop for e in self._edges):
            return False
        return len(self._edges) == len(self._vertices) - 1 and len(self.components()) == 1

    def internal_vertices(self) -> list[str]:
        return [v for v in self.vertex_ids if self.degree(v) >= 2]

    def leaves(self) -> list[str]:
        return [v for v in self.vertex_ids if self.degree(v) == 1]

    # -- functional updates ----------------------------------------------------

    def with_condition(self, vid: str, condition) -> "MetricGraph":
        idx = self.vertex_index(vid)
        verts = list(self._vertices)
        verts[idx] = Vertex(vid, condition)
        return MetricGraph(verts, self._edges)

    def with_edge(self, eid: str, **changes) -> "MetricGraph":
        idx = self.edge_index(eid)
        edges = list(self._edges)
        edges[idx] = replace(edges[idx], **changes)
        return MetricGraph(self._vertices, edges)

    def with_edge_length(self, eid: str, length: float, *, at: str | None = None) -> "MetricGraph":
        """Move one end of ``eid`` so its length becomes ``length``.

        ``at`` names the endpoint vertex that moves (default: the ``x = L``
        end); the potential piece touching that end absorbs the change.
        """
        e = self.edge(eid)
        at_end = at is None or at == e.w
        if at is not None and at not in (e.u, e.w):
            raise StructuralError("E_UNKNOWN_VERTEX", f"{at!r} is not an endpoint of {eid!r}")
        pot = e.potential.resized(length, at_end=at_end)
        return self.with_edge(eid, length=length, potential=pot)


# ---------------------------------------------------------------------------
# surgery
# ---------------------------------------------------------------------------


def _finite_delta_alpha(g: MetricGraph, vid: str) -> float:
    cond = g.condition(vid)
    alpha = cnd.delta_parameter(cond)
    if alpha is None:
        raise UnsupportedSurgery("E_UNSUPPORTED_SURGERY", f"vertex {vid!r} does not carry a delta-type condition")
    if alpha is INFINITY:
        raise UnsupportedSurgery("E_UNSUPPORTED_SURGERY", f"vertex {vid!r} is Dirichlet; the sum of couplings is undefined")
    return float(alpha)


def glue_vertices(g: MetricGraph, v0: str, v1: str, new_id: str | None = None) -> MetricGraph:
    """Identify ``v0`` and ``v1``; the merged vertex gets delta(alpha_0 + alpha_1)."""
    if v0 == v1:
        raise UnsupportedSurgery("E_UNSUPPORTED_SURGERY", "cannot glue a vertex to itself")
    a0 = _finite_delta_alpha(g, v0)
    a1 = _finite_delta_alpha(g, v1)
    merged = new_id or v0
    if merged != v0 and merged in g.vertex_ids and merged != v1:
        raise StructuralError("E_DUPLICATE_ID", f"vertex id {merged!r} already exists")
    verts = []
    for v in g.vertices:
        if v.id == v0:
            verts.append(Vertex(merged, Delta(a0 + a1)))
        elif v.id != v1:
            verts.append(v)
    rename = {v0: merged, v1: merged}
    edges = [replace(e, u=rename.get(e.u, e.u), w=rename.get(e.w, e.w)) for e in g.edges]
    return MetricGraph(verts, edges)


def glue_group(g: MetricGraph, group: Sequence[str], new_id: str | None = None) -> MetricGraph:
    """Identify all vertices of ``group`` (``len(group) - 1`` identifications)."""
    if len(group) < 2:
        raise UnsupportedSurgery("E_UNSUPPORTED_SURGERY", "a gluing group needs at least two vertices")
    if len(set(group)) != len(group):
        raise UnsupportedSurgery("E_UNSUPPORTED_SURGERY", "gluing group has repeated vertices")
    out = g
    head = group[0]
    for other in group[1:]:
        out = glue_vertices(out, head, other)
    if new_id is not None and new_id != head:
        out = rename_vertex(out, head, new_id)
    return out


def rename_vertex(g: MetricGraph, old: str, new: str) -> MetricGraph:
    if new in g.vertex_ids:
        raise StructuralError("E_DUPLICATE_ID", f"vertex id {new!r} already exists")
    verts = [Vertex(new, v.condition) if v.id == old else v for v in g.vertices]
    edges = [replace(e, u=new if e.u == old else e.u, w=new if e.w == old else e.w) for e in g.edges]
    return MetricGraph(verts, edges)


def set_dirichlet(g: MetricGraph, vid: str) -> MetricGraph:
    return g.with_condition(vid, Delta(INFINITY))


def split_vertex(g: MetricGraph, vid: str, condition=None) -> MetricGraph:
    """Cut the graph at ``vid``: every incident end gets its own degree-one vertex.

    New vertices are named ``{vid}#{k}`` in incident-end order and carry
    ``condition`` (Dirichlet by default).
    """
    condition = Delta(INFINITY) if condition is None else condition
    ends = g.ends(vid)
    verts = [v for v in g.vertices if v.id != vid]
    verts += [Vertex(f"{vid}#{k}", condition) for k in range(len(ends))]
    edges = list(g.edges)
    for k, end in enumerate(ends):
        e = edges[end.edge_index]
        if end.role == 0:
            edges[end.edge_index] = replace(e, u=f"{vid}#{k}")
        else:
            edges[end.edge_index] = replace(e, w=f"{vid}#{k}")
    return MetricGraph(verts, edges)


@dataclass(frozen=True)
class RescaledPair:
    geometric: MetricGraph
    algebraic: MetricGraph


def rescale(g: MetricGraph, xi: Mapping[str, float] | Sequence[float]) -> RescaledPair:
    """Dilate every edge by a positive factor, in two equivalent ways.

    * geometric: ``L_e -> xi_e L_e``, potentials stretched, conditions kept;
    * algebraic: lengths kept, edge operator ``-xi_e^{-2} d^2/dx^2 + V``,
      conditions ``(A_v, B_v Xi_v^{-1})`` on the raw derivative.

    The two are unitarily equivalent (the algebraic one in the
    ``xi``-weighted L2 space) and have the same spectrum.
    """
    if isinstance(xi, Mapping):
        factors = [float(xi.get(e.id, 1.0)) for e in g.edges]
    else:
        factors = [float(x) for x in xi]
        if len(factors) != g.n_edges:
            raise StructuralError("E_SCALING", f"expected {g.n_edges} scaling factors, got {len(factors)}")
    if any(not math.isfinite(x) or x <= 0 for x in factors):
        raise StructuralError("E_SCALING", "scaling factors must be finite and positive")

    geo_edges = [
        replace(e, length=e.length * x, potential=e.potential.stretched(x)) for e, x in zip(g.edges, factors)
    ]
    geometric = MetricGraph(g.vertices, geo_edges)

    alg_edges = [replace(e, coefficient=e.coefficient / (x * x)) for e, x in zip(g.edges, factors)]
    alg_verts = []
    for v in g.vertices:
        ab = g.ab(v.id)
        scale = np.array([factors[end.edge_index] for end in g.ends(v.id)])
        alg_verts.append(Vertex(v.id, GeneralAB(ab.A, ab.B / scale[None, :])))
    algebraic = MetricGraph(alg_verts, alg_edges)
    return RescaledPair(geometric, algebraic)
