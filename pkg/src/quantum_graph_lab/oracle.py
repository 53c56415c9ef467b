"""Piecewise-linear finite elements for the quadratic form.

The form of the operator with vertex conditions in projector form is

    h[f] = sum_e int (c_e |f'|^2 + V |f|^2) w_e dx + sum_v <Lambda_v F(v), F(v)>,

on functions with ``P_D F(v) = 0``, where ``w_e = 1/sqrt(c_e)`` and
``c_e w_e = sqrt(c_e)`` (for ``c_e = 1`` this is the familiar form).  Only
conditions whose non-Dirichlet part is a continuity structure are
discretized: ``I - P_D`` must be block-constant on groups of edge ends,
which covers delta, extended delta, Dirichlet and decoupled Robin vertices.
Everything else raises :class:`UnsupportedOracle`; nothing is approximated.

This module never touches the fundamental-system code, so its eigenvalues
are an independent check on the secular solver.  Conforming elements give
upper bounds: ``lambda_n(h) >= lambda_n`` for every ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from . import conditions as cnd
from .errors import StructuralError, UnsupportedOracle
from .graph import MetricGraph

_GROUP_TOL = 1e-9
MAX_DOFS = 6000


# ---------------------------------------------------------------------------
# vertex structure
# ---------------------------------------------------------------------------


def continuity_groups(pf: cnd.ProjectorForm) -> list[list[int]]:
    """Groups of edge ends sharing one value, read off ``I - P_D``."""
    d = pf.dimension
    P_W = np.eye(d) - np.asarray(pf.P_D)
    seen = set()
    groups = []
    for i in range(d):
        if i in seen or abs(P_W[i, i]) < _GROUP_TOL:
            continue
        grp = [j for j in range(d) if abs(P_W[i, j]) > _GROUP_TOL]
        target = 1.0 / len(grp)
        for a in grp:
            for b in range(d):
                want = target if b in grp else 0.0
                if abs(P_W[a, b] - want) > 1e-7:
                    raise UnsupportedOracle(
                        "E_UNSUPPORTED_ORACLE",
                        "vertex condition is not of continuity type (non-block trace subspace)",
                    )
        seen.update(grp)
        groups.append(grp)
    for i in range(d):
        if i not in seen and abs(P_W[i, i]) > _GROUP_TOL:
            raise UnsupportedOracle("E_UNSUPPORTED_ORACLE", "vertex condition is not of continuity type")
    return groups


@dataclass(frozen=True, eq=False)
class Discretization:
    """Mesh, degree-of-freedom map and form matrices for one graph."""

    graph: MetricGraph
    nodes: tuple[np.ndarray, ...]  # per edge, node coordinates including ends
    edge_dofs: tuple[np.ndarray, ...]  # per edge, dof index per node (-1 for Dirichlet)
    n_dofs: int
    vertex_dofs: dict  # vertex id -> list of (group end indices, dof)
    stiffness: np.ndarray
    mass: np.ndarray
    potential: np.ndarray
    vertex_term: np.ndarray

    @property
    def operator(self) -> np.ndarray:
        return self.stiffness + self.potential + self.vertex_term

    @property
    def max_width(self) -> float:
        return max(float(np.max(np.diff(x))) for x in self.nodes)


def _edge_nodes(edge, h: float, refine: int) -> np.ndarray:
    pts = [np.array([0.0])]
    for x0, x1, _ in edge.potential.pieces():
        n = max(1, math.ceil((x1 - x0) / h - 1e-9)) * refine
        pts.append(np.linspace(x0, x1, n + 1)[1:])
    x = np.concatenate(pts)
    if x.size < 3:
        x = np.linspace(0.0, edge.length, 3)
    return x


def discretize(g: MetricGraph, h: float, refine: int = 1) -> Discretization:
    """Assemble the form matrices on a mesh of width about ``h / refine``.

    Cells are ``refine`` times the cells for width ``h``, so refinements of
    the same ``h`` are exactly nested.
    """
    if h <= 0:
        raise StructuralError("E_MESH", "mesh width must be positive")

    vertex_dofs = {}
    end_dof = {}
    lam_blocks = []
    n = 0
    for v in g.vertices:
        pf = cnd.ab_to_projector(g.flux_condition(v.id))
        groups = continuity_groups(pf)
        ends = g.ends(v.id)
        entries = []
        for grp in groups:
            for j in grp:
                end_dof[ends[j].slot] = n
            entries.append((grp, n))
            n += 1
        vertex_dofs[v.id] = entries
        lam_blocks.append((np.asarray(pf.Lambda), entries, len(ends)))

    nodes, dofs = [], []
    for i, e in enumerate(g.edges):
        x = _edge_nodes(e, h, refine)
        idx = np.empty(x.size, dtype=int)
        idx[0] = end_dof.get(2 * i, -1)
        idx[-1] = end_dof.get(2 * i + 1, -1)
        m = x.size - 2
        idx[1:-1] = np.arange(n, n + m)
        n += m
        nodes.append(x)
        dofs.append(idx)
    if n > MAX_DOFS:
        raise MemoryError(f"{n} degrees of freedom exceed the dense limit {MAX_DOFS}")

    dtype = complex if not g.is_real else float
    K = np.zeros((n, n), dtype=dtype)
    Mm = np.zeros((n, n))
    P = np.zeros((n, n))
    for e, x, idx in zip(g.edges, nodes, dofs):
        sc = math.sqrt(e.coefficient)
        w = np.diff(x)
        V = e.potential(0.5 * (x[:-1] + x[1:]))
        ke = np.array([[1.0, -1.0], [-1.0, 1.0]])
        me = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        for j in range(w.size):
            a, b = idx[j], idx[j + 1]
            loc = [a, b]
            for p in range(2):
                if loc[p] < 0:
                    continue
                for q in range(2):
                    if loc[q] < 0:
                        continue
                    K[loc[p], loc[q]] += sc * ke[p, q] / w[j]
                    Mm[loc[p], loc[q]] += me[p, q] * w[j] / sc
                    P[loc[p], loc[q]] += V[j] * me[p, q] * w[j] / sc

    T = np.zeros((n, n), dtype=dtype)
    for Lam, entries, d in lam_blocks:
        for gi, di in entries:
            for gj, dj in entries:
                one_i = np.zeros(d)
                one_i[gi] = 1.0
                one_j = np.zeros(d)
                one_j[gj] = 1.0
                T[di, dj] += one_i @ Lam @ one_j
    if dtype is float:
        K, T = np.real(K), np.real(T)
    return Discretization(g, tuple(nodes), tuple(dofs), n, vertex_dofs, K, Mm, P, 0.5 * (T + T.conj().T))


def default_mesh_width(g: MetricGraph) -> float:
    """Coarse width for certificates: at most 1/16, at least 4 cells per edge."""
    h = min(1.0 / 16.0, min(e.length for e in g.edges) / 4.0)
    return max(h, g.total_length / 1500.0)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FemSpectrum:
    """Lowest discrete eigenvalues (repeated by multiplicity)."""

    eigenvalues: np.ndarray
    h: float
    refine: int
    max_width: float
    n_dofs: int

    def grouped(self, rel: float = 1e-8) -> tuple[np.ndarray, tuple[int, ...]]:
        vals, mults = [], []
        for lam in self.eigenvalues:
            if vals and abs(lam - vals[-1]) <= rel * max(1.0, abs(lam)):
                mults[-1] += 1
            else:
                vals.append(float(lam))
                mults.append(1)
        return np.array(vals), tuple(mults)


def _solve(disc: Discretization, **subset):
    return sla.eigh(disc.operator, disc.mass, **subset)


def fem_spectrum(g: MetricGraph, h: float, count: int, refine: int = 1) -> FemSpectrum:
    """The ``count`` lowest discrete eigenvalues on a mesh of width ``h / refine``."""
    disc = discretize(g, h, refine)
    count = min(count, disc.n_dofs)
    w = _solve(disc, subset_by_index=(0, count - 1), eigvals_only=True) if count else np.zeros(0)
    return FemSpectrum(np.asarray(w, dtype=float), h, refine, disc.max_width, disc.n_dofs)


def fem_lowest(g: MetricGraph, h: float, count: int) -> np.ndarray:
    return fem_spectrum(g, h, count).eigenvalues


def fem_eigenvalues_below(g: MetricGraph, lam_max: float, h: float) -> np.ndarray:
    """All discrete eigenvalues ``<= lam_max``."""
    disc = discretize(g, h)
    if disc.n_dofs == 0:
        return np.zeros(0)
    w = sla.eigh(disc.operator, disc.mass, eigvals_only=True)
    return w[w <= lam_max]


def fem_sequence(g: MetricGraph, h: float, levels: int, count: int) -> list[FemSpectrum]:
    """Spectra on exactly nested meshes ``h, h/2, h/4, ...``."""
    return [fem_spectrum(g, h, count, refine=2**k) for k in range(levels)]


def richardson(coarse: FemSpectrum, fine: FemSpectrum) -> np.ndarray:
    """``(4 lambda(h/2) - lambda(h)) / 3`` for a nested pair."""
    if fine.refine != 2 * coarse.refine or fine.h != coarse.h:
        raise ValueError("Richardson extrapolation needs an exactly nested pair")
    n = min(coarse.eigenvalues.size, fine.eigenvalues.size)
    return (4.0 * fine.eigenvalues[:n] - coarse.eigenvalues[:n]) / 3.0


def richardson_all(seq: Sequence[FemSpectrum]) -> np.ndarray:
    """Repeated Richardson over a nested sequence, eliminating h^2, h^4, ...

    The P1 eigenvalue error on piecewise uniform meshes expands in even
    powers of the width, so level ``j`` uses the factor ``4**j``.
    """
    if len(seq) < 2:
        raise ValueError("Richardson extrapolation needs at least two levels")
    n = min(s.eigenvalues.size for s in seq)
    col = [np.asarray(s.eigenvalues[:n], dtype=float) for s in seq]
    for a, b in zip(seq[:-1], seq[1:]):
        if b.refine != 2 * a.refine or b.h != a.h:
            raise ValueError("Richardson extrapolation needs an exactly nested sequence")
    j = 1
    while len(col) > 1:
        f = 4.0**j
        col = [(f * fine - coarse) / (f - 1.0) for coarse, fine in zip(col[:-1], col[1:])]
        j += 1
    return col[0]


def convergence_slope(widths: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(width)``."""
    x = np.log(np.asarray(widths, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# discrete functions and the form
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Nodal values of a continuous piecewise-linear function on each edge."""

    graph: MetricGraph
    nodes: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]

    @classmethod
    def from_callable(cls, g: MetricGraph, h: float, fn: Callable, refine: int = 1) -> "DiscreteFunction":
        """Interpolate ``fn(edge_id, x)`` on the mesh of width ``h``."""
        nodes = tuple(_edge_nodes(e, h, refine) for e in g.edges)
        vals = tuple(np.asarray(fn(e.id, x), dtype=complex if not g.is_real else float) * np.ones(x.shape)
                     for e, x in zip(g.edges, nodes))
        return cls(g, nodes, vals)

    @classmethod
    def from_dofs(cls, disc: Discretization, u: np.ndarray) -> "DiscreteFunction":
        vals = []
        for idx in disc.edge_dofs:
            v = np.zeros(idx.size, dtype=u.dtype)
            ok = idx >= 0
            v[ok] = u[idx[ok]]
            vals.append(v)
        return cls(disc.graph, disc.nodes, tuple(vals))

    def end_values(self, vid: str) -> np.ndarray:
        out = []
        for end in self.graph.ends(vid):
            v = self.values[end.edge_index]
            out.append(v[0] if end.role == 0 else v[-1])
        return np.array(out)

    def conformity_defect(self) -> float:
        """Largest violation of continuity / Dirichlet constraints."""
        worst = 0.0
        for v in self.graph.vertices:
            pf = cnd.ab_to_projector(self.graph.flux_condition(v.id))
            F = self.end_values(v.id)
            scale = max(1.0, float(np.max(np.abs(F)))) if F.size else 1.0
            worst = max(worst, float(np.linalg.norm(np.asarray(pf.P_D) @ F)) / scale)
        return worst

    def check_conforming(self, tol: float = 1e-10) -> None:
        continuity_groups_all(self.graph)
        defect = self.conformity_defect()
        if defect > tol:
            raise StructuralError("E_NONCONFORMING", f"function violates the vertex structure (defect {defect:.3e})")


def continuity_groups_all(g: MetricGraph) -> dict:
    return {v.id: continuity_groups(cnd.ab_to_projector(g.flux_condition(v.id))) for v in g.vertices}


def _linear_sq_integral(a, b, w):
    """``int_0^w |a + (b - a) t/w|^2 dt``."""
    return w * (abs(a) ** 2 + np.real(a * np.conj(b)) + abs(b) ** 2) / 3.0


def quadratic_form(g: MetricGraph, f: DiscreteFunction) -> float:
    """``h[f]`` by exact integration of the piecewise-linear function."""
    f.check_conforming()
    total = 0.0
    for e, x, u in zip(g.edges, f.nodes, f.values):
        sc = math.sqrt(e.coefficient)
        # split cells at potential breakpoints so V is constant per sub-cell
        pts = np.union1d(x, np.asarray(e.potential.breakpoints, dtype=float))
        uu = np.interp(pts, x, np.real(u)) + (1j * np.interp(pts, x, np.imag(u)) if np.iscomplexobj(u) else 0.0)
        w = np.diff(pts)
        du = np.diff(uu)
        total += float(np.sum(sc * np.abs(du) ** 2 / w))
        V = e.potential(0.5 * (pts[:-1] + pts[1:]))
        total += float(np.sum(V * _linear_sq_integral(uu[:-1], uu[1:], w))) / sc
    for v in g.vertices:
        pf = cnd.ab_to_projector(g.flux_condition(v.id))
        F = f.end_values(v.id)
        total += float(np.real(np.conj(F) @ np.asarray(pf.Lambda) @ F))
    return total


def l2_norm_sq(g: MetricGraph, f: DiscreteFunction) -> float:
    total = 0.0
    for e, x, u in zip(g.edges, f.nodes, f.values):
        total += float(np.sum(_linear_sq_integral(u[:-1], u[1:], np.diff(x)))) / math.sqrt(e.coefficient)
    return total


def rayleigh_quotient(g: MetricGraph, f: DiscreteFunction) -> float:
    return quadratic_form(g, f) / l2_norm_sq(g, f)


# ---------------------------------------------------------------------------
# min-max
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimaxReport:
    n: int
    lam_n: float
    trial_maxima: tuple[float, ...]
    bounds_hold: bool
    attained: float
    attainment_ok: bool

    @property
    def passed(self) -> bool:
        return self.bounds_hold and self.attainment_ok


def _max_quotient(disc: Discretization, Vt: np.ndarray) -> float:
    K = disc.operator
    A = Vt.conj().T @ K @ Vt
    B = Vt.conj().T @ disc.mass @ Vt
    return float(sla.eigh(0.5 * (A + A.conj().T), 0.5 * (B + B.conj().T), eigvals_only=True)[-1])


def minimax_check(
    g: MetricGraph,
    n: int,
    trials: Sequence,
    h: float,
    tol: float = 1e-9,
) -> MinimaxReport:
    """Check ``lambda_n <= max R`` over every ``n``-dimensional trial subspace.

    ``trials`` holds subspaces, each either a ``(n_dofs, n)`` array in the
    discretization's basis or a sequence of ``n`` callables ``fn(edge_id, x)``
    which are interpolated on the mesh.
    """
    disc = discretize(g, h)
    w, X = _solve(disc, subset_by_index=(0, n - 1))
    lam_n = float(w[-1])
    maxima = []
    for t in trials:
        if isinstance(t, np.ndarray):
            Vt = t
        else:
            cols = []
            for fn in t:
                df = DiscreteFunction.from_callable(g, h, fn)
                cols.append(_dofs_of(disc, df))
            Vt = np.array(cols).T
        if Vt.shape[1] != n:
            raise StructuralError("E_TRIAL_DIMENSION", f"trial subspace has dimension {Vt.shape[1]}, expected {n}")
        maxima.append(_max_quotient(disc, Vt))
    scale = max(1.0, abs(lam_n))
    bounds = all(m >= lam_n - tol * scale for m in maxima)
    attained = _max_quotient(disc, X)
    return MinimaxReport(n, lam_n, tuple(maxima), bounds, attained, abs(attained - lam_n) <= tol * scale)


def _dofs_of(disc: Discretization, f: DiscreteFunction) -> np.ndarray:
    u = np.zeros(disc.n_dofs, dtype=f.values[0].dtype)
    for idx, vals in zip(disc.edge_dofs, f.values):
        ok = idx >= 0
        u[idx[ok]] = vals[ok]
    return u
