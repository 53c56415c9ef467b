"""Spectra and eigenfunctions from the secular system.

On each edge an eigenfunction is ``f = a c(x) + b s(x)``.  Imposing
``A_v F(v) + B_v F'(v) = 0`` at every vertex gives a square ``2E x 2E``
system ``M(lambda) (a, b) = 0``; ``lambda`` is an eigenvalue iff
``M(lambda)`` is singular, with multiplicity equal to its nullity.

Zeros are located by scanning the smallest singular value of the
column-scaled ``M``, refining dips by a batched bracketing search and
polishing simple roots on the (analytic) determinant.  Completeness is
certified against an exact eigenvalue counting function built from the
quadratic form: for ``lambda`` away from the decoupled Dirichlet spectrum,

    #{eigenvalues < lambda} = #{Dirichlet edge eigenvalues < lambda}
                              + n_minus( W^* (Lambda - DtN(lambda)) W ),

where ``W`` spans the non-Dirichlet trace directions, ``Lambda`` is the
Robin operator of the vertex conditions and ``DtN`` the edge
Dirichlet-to-Neumann map.  Edge counts come from Pruefer phases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import conditions as cnd
from .errors import NumericalRefusal, StructuralError, UnsupportedOracle
from .fundamental import edge_transfer, edge_transfer_at, local_wavenumber, piece_cs
from .graph import MetricGraph

log = logging.getLogger(__name__)

TAU_MULT = 1e-7
TAU_EIG = 1e-6
REFINE_REL = 1e-11
JUMP_REL = 1e-9


# ---------------------------------------------------------------------------
# per-graph precomputation
# ---------------------------------------------------------------------------


class _Model:
    """Condition matrices and trace bookkeeping shared by all solver calls."""

    def __init__(self, g: MetricGraph):
        self.g = g
        E = g.n_edges
        self.E = E
        self.complex = not g.is_real
        self.dtype = complex if self.complex else float
        self.blocks = []
        row = 0
        for v in g.vertices:
            ab = cnd.orthonormal_rows(g.ab(v.id))
            ends = g.ends(v.id)
            self.blocks.append((row, ab.A, ab.B, ends))
            row += len(ends)
        assert row == 2 * E

        # quadratic-form data for the counting function (flux variables)
        W_cols = []
        Lam = np.zeros((2 * E, 2 * E), dtype=self.dtype)
        for v in g.vertices:
            d = g.degree(v.id)
            pf = cnd.ab_to_projector(g.flux_condition(v.id))
            slots = [end.slot for end in g.ends(v.id)]
            P_W = np.eye(d) - pf.P_D
            w, U = np.linalg.eigh(0.5 * (P_W + P_W.conj().T))
            basis = U[:, w > 0.5]
            for j in range(basis.shape[1]):
                col = np.zeros(2 * E, dtype=self.dtype)
                col[slots] = basis[:, j]
                W_cols.append(col)
            for i, si in enumerate(slots):
                for j, sj in enumerate(slots):
                    Lam[si, sj] += pf.Lambda[i, j]
        self.W = np.array(W_cols, dtype=self.dtype).T.reshape(2 * E, len(W_cols))
        self.Lam = Lam
        self.sqrt_c = np.array([math.sqrt(e.coefficient) for e in g.edges])


def _model(g: MetricGraph) -> _Model:
    m = g.__dict__.get("_secular_model")
    if m is None:
        m = _Model(g)
        g.__dict__["_secular_model"] = m
    return m


# ---------------------------------------------------------------------------
# secular matrix
# ---------------------------------------------------------------------------


def _edge_traces(g: MetricGraph, lams: np.ndarray):
    """Arrays (E, n) of c(L), s(L), c'(L), s'(L)."""
    out = np.empty((4, g.n_edges) + lams.shape)
    for i, e in enumerate(g.edges):
        T = edge_transfer(e, lams)
        out[0, i] = T[..., 0, 0]
        out[1, i] = T[..., 0, 1]
        out[2, i] = T[..., 1, 0]
        out[3, i] = T[..., 1, 1]
    return out


def assemble_batch(g: MetricGraph, lams) -> np.ndarray:
    """Secular matrices for every ``lambda`` in ``lams`` (shape ``(n, 2E, 2E)``)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    m = _model(g)
    n = lams.shape[0]
    M = np.zeros((n, 2 * m.E, 2 * m.E), dtype=m.dtype)
    c, s, cp, sp = _edge_traces(g, lams)
    for row, A, B, ends in m.blocks:
        d = len(ends)
        rows = slice(row, row + d)
        for j, end in enumerate(ends):
            e = end.edge_index
            if end.role == 0:
                M[:, rows, 2 * e] += A[:, j]
                M[:, rows, 2 * e + 1] += B[:, j]
            else:
                M[:, rows, 2 * e] += A[None, :, j] * c[e][:, None] - B[None, :, j] * cp[e][:, None]
                M[:, rows, 2 * e + 1] += A[None, :, j] * s[e][:, None] - B[None, :, j] * sp[e][:, None]
    return M


def column_scale(g: MetricGraph, lams) -> np.ndarray:
    """Smooth positive column weights, shape ``(n, 2E)``.

    ``a_e`` columns are divided by the growth of the edge transfer and
    ``b_e`` columns additionally multiplied by the local wavenumber, so
    both columns are O(1).  The weights never vanish, hence the zero set
    of ``det`` is unchanged.  (Normalizing each column by its own norm
    would not do: a column can vanish identically at an eigenvalue.)
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    out = np.empty(lams.shape + (2 * g.n_edges,))
    for i, e in enumerate(g.edges):
        log_growth = np.zeros(lams.shape)
        k = np.ones(lams.shape)
        for x0, x1, V in e.potential.pieces():
            mu = (lams - V) / e.coefficient
            kap = np.sqrt(np.maximum(-mu, 0.0))
            kl = kap * (x1 - x0)
            log_growth += kl + np.log1p(np.exp(-2.0 * kl)) - math.log(2.0)
            k = np.maximum(k, np.sqrt(np.abs(mu)))
        w = np.exp(-log_growth)
        out[:, 2 * i] = w
        out[:, 2 * i + 1] = w * k
    return out


def _scaled(g: MetricGraph, lams, M: np.ndarray):
    scale = column_scale(g, lams)
    return M * scale[:, None, :], scale


@dataclass(frozen=True, eq=False)
class SecularMatrix:
    """``M(lambda)``: vertex rows, per-edge ``(a_e, b_e)`` columns."""

    lam: float
    matrix: np.ndarray
    column_scale: np.ndarray

    @property
    def scaled(self) -> np.ndarray:
        return self.matrix * self.column_scale[None, :]


def assemble_secular(g: MetricGraph, lam: float) -> SecularMatrix:
    M = assemble_batch(g, [lam])[0]
    return SecularMatrix(float(lam), M, column_scale(g, [lam])[0])


def sigma_min_batch(g: MetricGraph, lams, chunk: int = 1024) -> np.ndarray:
    lams = np.asarray(lams, dtype=float)
    out = np.empty(lams.shape[0])
    for start in range(0, lams.shape[0], chunk):
        part = lams[start : start + chunk]
        Me, _ = _scaled(g, part, assemble_batch(g, part))
        out[start : start + chunk] = np.linalg.svd(Me, compute_uv=False)[:, -1]
    return out


def secular_value(g: MetricGraph, lam: float) -> tuple[float, float]:
    """``(sigma_min, log|det M|)``; ``sigma_min`` of the column-scaled matrix."""
    sm = assemble_secular(g, lam)
    sv = np.linalg.svd(sm.scaled, compute_uv=False)
    _, logdet = np.linalg.slogdet(sm.matrix)
    return float(sv[-1]), float(logdet)


def _singular_values(g: MetricGraph, lam: float) -> np.ndarray:
    return np.linalg.svd(assemble_secular(g, lam).scaled, compute_uv=False)


def _sigma(g: MetricGraph, lam: float) -> float:
    return float(_singular_values(g, lam)[-1])


# ---------------------------------------------------------------------------
# exact counting function
# ---------------------------------------------------------------------------


def dirichlet_edge_count(edge, lam: float) -> int:
    """Number of Dirichlet-Dirichlet eigenvalues of ``edge`` below ``lam``.

    Counts zeros of ``s(.; lam)`` in ``(0, L)`` (Sturm oscillation).
    """
    f, fp = 0.0, 1.0
    zeros = 0
    end_zero = False
    for x0, x1, V in edge.potential.pieces():
        ell = x1 - x0
        mu = (lam - V) / edge.coefficient
        C, S = piece_cs(mu, ell)
        C, S = float(C), float(S)
        f1 = C * f + S * fp
        fp1 = -mu * S * f + C * fp
        if mu * ell * ell >= 1e-6 and math.sqrt(mu) * ell >= math.pi:
            k = math.sqrt(mu)
            phi0 = math.atan2(k * f, fp)
            top = (phi0 + k * ell) / math.pi
            zeros += math.floor(top) - math.floor(phi0 / math.pi)
            # the phase decides an end zero, so the count agrees with the sign of f there
            end_zero = top == math.floor(top)
            if end_zero:
                f1 = 0.0
        else:
            if f != 0.0 and (f1 == 0.0 or (f1 > 0) != (f > 0)):
                zeros += 1
            end_zero = f1 == 0.0
        scale = max(abs(f1), abs(fp1))
        f, fp = f1 / scale, fp1 / scale
    if end_zero:
        zeros -= 1
    return zeros


BORDER_REL = 1e-3


def eigenvalue_count(g: MetricGraph, lam: float) -> int:
    """Exact number of eigenvalues strictly below ``lam`` (with multiplicity).

    Dirichlet counts per edge plus the negative index of the vertex form
    built from the edge Dirichlet-to-Neumann maps.  Near a pole of an edge
    map (``s`` small) its rank-one singular part is moved into a border
    row, which keeps the form well conditioned through the pole.
    """
    lam = float(lam)
    m = _model(g)
    E = m.E
    D = np.zeros((2 * E, 2 * E))
    borders, n_dir, n_pos = [], 0, 0
    for i, e in enumerate(g.edges):
        T = edge_transfer(e, lam)
        c, s, cp, sp = T[0, 0], T[0, 1], T[1, 0], T[1, 1]
        n_i = dirichlet_edge_count(e, lam)
        n_dir += n_i
        k = max(1.0, local_wavenumber(e, lam))
        margin = abs(s) * k / max(1.0, abs(c), abs(sp))
        if margin >= BORDER_REL or abs(c * sp) < 0.5:
            D[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = np.array([[-c, 1.0], [1.0, -sp]]) / s * m.sqrt_c[i]
            continue
        # c sp - s cp = 1 gives [[-c, 1], [1, -sp]] / s = -u u^T / (c s) + diag(0, -cp / c);
        # s(L) has sign (-1)^n_i, which keeps the border consistent with n_i at the pole
        s = abs(s) if n_i % 2 == 0 else -abs(s)
        D[2 * i + 1, 2 * i + 1] = -cp / c * m.sqrt_c[i]
        u = np.zeros(2 * E)
        u[2 * i], u[2 * i + 1] = c, -1.0
        borders.append((u, c * s / m.sqrt_c[i]))
        n_pos += c * s > 0
    if m.W.shape[1] == 0 and not borders:
        return n_dir
    Q = m.W.conj().T @ (m.Lam - D) @ m.W
    if borders:
        U = m.W.conj().T @ np.array([u for u, _ in borders]).T
        C = np.diag([-t for _, t in borders])
        Q = np.block([[Q, U], [U.conj().T, C]])
    Q = 0.5 * (Q + Q.conj().T)
    ev = np.linalg.eigvalsh(Q)
    return n_dir + int(np.sum(ev < 0)) - n_pos


def count_at_most(g: MetricGraph, x: float) -> int:
    """Number of eigenvalues ``<= x``."""
    return eigenvalue_count(g, x + 1e-12 * max(1.0, abs(x)))


def _jump(g: MetricGraph, lam: float, eps: float | None = None) -> int:
    eps = JUMP_REL * max(1.0, abs(lam)) if eps is None else eps
    return eigenvalue_count(g, lam + eps) - eigenvalue_count(g, lam - eps)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


@dataclass
class SolverOptions:
    tau_mult: float = TAU_MULT
    scan_density: int = 8
    negative_steps: int = 64
    refine_rel: float = REFINE_REL
    accept_sigma: float = 1e-6
    polish: bool = True
    oracle: bool = True
    oracle_h: float | None = None
    max_rescans: int = 2


@dataclass(frozen=True)
class Certificate:
    found: int
    exact_count: int
    weyl_estimate: float
    oracle_count: int | None = None
    oracle_exact_count: int | None = None
    oracle_status: str = "skipped"
    rescans: int = 0
    recovered: int = 0
    rejected: int = 0
    clusters: tuple[tuple[float, int, int], ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return self.found == self.exact_count

    @property
    def weyl_discrepancy(self) -> float:
        return self.found - self.weyl_estimate


@dataclass(frozen=True)
class Spectrum:
    """Distinct eigenvalues in ``(lo, hi]`` with multiplicities."""

    values: np.ndarray
    multiplicities: tuple[int, ...]
    window: tuple[float, float]
    certificate: Certificate | None = None
    start_index: int = 1

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity, ascending."""
        return np.repeat(np.asarray(self.values, dtype=float), self.multiplicities)

    def __len__(self) -> int:
        return int(sum(self.multiplicities))

    def indexed(self):
        """``(n, lambda, multiplicity)`` with ``n`` the global index of the first copy."""
        n = self.start_index
        out = []
        for lam, mult in zip(self.values, self.multiplicities):
            out.append((n, float(lam), int(mult)))
            n += mult
        return out


def _scan_grid(g: MetricGraph, lo: float, hi: float, density: int, neg_steps: int) -> np.ndarray:
    L = g.effective_length
    pts = []
    if lo < 0:
        top = min(hi, 0.0)
        step = (top - lo) / neg_steps
        pts.append(np.linspace(lo - step, top, neg_steps + 2))
    if hi > 0:
        # k-scan in the variable k = sqrt(lambda); spacing pi / (density L_eff)
        k_lo = math.sqrt(max(lo, 0.0))
        k_hi = math.sqrt(hi)
        dk = math.pi / (density * L)
        k = np.arange(max(k_lo - dk, 0.0), k_hi + 2 * dk, dk)
        if k.size < 3:
            k = np.linspace(max(k_lo - dk, 0.0), k_hi + dk, 3)
        lam = k * k
        if lo >= 0 and k_lo < dk:
            # pad below the window when it starts near the origin
            lam = np.concatenate([[lo - dk * dk], lam])
        pts.append(lam)
    grid = np.unique(np.concatenate(pts))
    return grid


def _zoom(g: MetricGraph, a: float, b: float, rel: float, npts: int = 17) -> tuple[float, float]:
    """Minimize ``sigma_min`` on ``[a, b]`` by repeated batched sampling.

    Each round evaluates ``npts`` points in one batched SVD and keeps the
    two cells around the smallest value, shrinking the bracket by a factor
    ``(npts - 1) / 2``.  Stops once the bracket is below
    ``rel * max(1, |lambda|)``.
    """
    best_x, best_s = 0.5 * (a + b), math.inf
    while True:
        xs = np.linspace(a, b, npts)
        sig = sigma_min_batch(g, xs)
        i = int(np.argmin(sig))
        if sig[i] <= best_s:
            best_x, best_s = float(xs[i]), float(sig[i])
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, npts - 1)]
        if b - a <= rel * max(1.0, abs(best_x)) or b - a <= 4.0 * np.spacing(max(abs(a), abs(b))):
            return best_x, best_s


def _refine(g: MetricGraph, a: float, b: float, rel: float) -> tuple[float, float]:
    return _zoom(g, a, b, rel)


def _polish(g: MetricGraph, lam: float, rel: float) -> float:
    """Root of the determinant near a simple eigenvalue (machine precision)."""
    scale = assemble_secular(g, lam).column_scale
    delta = max(50.0 * rel * max(1.0, abs(lam)), 1e-13)

    def det(x):
        M = assemble_batch(g, [x])[0] * scale[None, :]
        return np.linalg.det(M)

    d_lo, d_hi = det(lam - delta), det(lam + delta)
    direction = np.conj(d_hi - d_lo)
    if direction == 0:
        return lam

    def f(x):
        return float(np.real(det(x) * direction))

    f_lo, f_hi = float(np.real(d_lo * direction)), float(np.real(d_hi * direction))
    if not (f_lo < 0 < f_hi):
        return lam
    try:
        root = brentq(f, lam - delta, lam + delta, xtol=1e-15 * max(1.0, abs(lam)), rtol=1e-15, maxiter=200)
    except (ValueError, RuntimeError):
        return lam
    if _sigma(g, root) <= _sigma(g, lam) * 10 + 1e-14:
        return float(root)
    return lam


def _local_minima(sig: np.ndarray) -> list[int]:
    idx = []
    for i in range(1, sig.size - 1):
        if sig[i] <= sig[i - 1] and sig[i] <= sig[i + 1]:
            if sig[i] == sig[i - 1] and idx and idx[-1] == i - 1:
                continue
            idx.append(i)
    return idx


def _roots_from_grid(g: MetricGraph, grid: np.ndarray, opts: SolverOptions) -> list[tuple[float, float]]:
    sig = sigma_min_batch(g, grid)
    found = []
    for i in _local_minima(sig):
        lam, s = _refine(g, grid[i - 1], grid[i + 1], opts.refine_rel)
        if s <= opts.accept_sigma:
            found.append((lam, s))
    return found


def _isolate(g: MetricGraph, a: float, b: float, ca: int, cb: int, rel: float) -> list[tuple[float, int]]:
    """Bisect on the counting function; eigenvalues lie in ``[a, b)``."""
    if cb - ca <= 0:
        return []
    if b - a <= 1e-8 * max(1.0, abs(a)):
        return [(0.5 * (a + b), cb - ca)]
    m = 0.5 * (a + b)
    cm = eigenvalue_count(g, m)
    return _isolate(g, a, m, ca, cm, rel) + _isolate(g, m, b, cm, cb, rel)


def _weyl(g: MetricGraph, lo: float, hi: float) -> float:
    L = g.effective_length
    return L * (math.sqrt(max(hi, 0.0)) - math.sqrt(max(lo, 0.0))) / math.pi


def find_spectrum(g: MetricGraph, window: tuple[float, float], options: SolverOptions | None = None) -> Spectrum:
    """All eigenvalues in the half-open window ``(lo, hi]`` with multiplicities."""
    opts = options or SolverOptions()
    lo, hi = (float(window[0]), float(window[1]))
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise StructuralError("E_WINDOW", f"invalid window ({lo}, {hi}]")

    notes: list[str] = []
    grid = _scan_grid(g, lo, hi, opts.scan_density, opts.negative_steps)
    candidates = _roots_from_grid(g, grid, opts)

    roots: dict[float, int] = {}
    rank_mult: dict[float, int] = {}
    rejected = 0

    def admit(lam: float) -> bool:
        nonlocal rejected
        if not (lo < lam <= hi):
            return False
        eps = JUMP_REL * max(1.0, abs(lam))
        for r in roots:
            if abs(r - lam) <= 2 * eps:
                return False
        j = _jump(g, lam)
        if j <= 0:
            rejected += 1
            return False
        roots[lam] = j
        sv = _singular_values(g, lam)
        rank_mult[lam] = int(np.sum(sv <= opts.tau_mult * sv[0]))
        return True

    for lam, _ in sorted(candidates):
        admit(lam)

    n_lo = count_at_most(g, lo)
    exact = count_at_most(g, hi) - n_lo
    rescans = 0
    recovered = 0
    while sum(roots.values()) < exact and rescans < opts.max_rescans:
        rescans += 1
        density = opts.scan_density * 8 ** rescans
        for a, b in _missing_intervals(g, lo, hi, sorted(roots)):
            sub = _scan_grid(g, a, b, density, opts.negative_steps * 8 ** rescans)
            for lam, _ in sorted(_roots_from_grid(g, sub, opts)):
                if admit(lam):
                    recovered += 1
    if sum(roots.values()) < exact:
        notes.append("scan incomplete; isolating remaining eigenvalues by counting-function bisection")
        for a, b in _missing_intervals(g, lo, hi, sorted(roots)):
            ca, cb = eigenvalue_count(g, a), eigenvalue_count(g, b)
            for mid, cnt in _isolate(g, a, b, ca, cb, opts.refine_rel):
                w = 1e-8 * max(1.0, abs(mid))
                lam, _ = _refine(g, mid - w, mid + w, opts.refine_rel)
                if admit(lam):
                    recovered += 1
                else:
                    roots[mid] = cnt
                    rank_mult[mid] = 0
                    recovered += 1

    values = sorted(roots)
    clusters = []
    for lam in values:
        if rank_mult.get(lam) != roots[lam]:
            clusters.append((float(lam), int(roots[lam]), int(rank_mult.get(lam, 0))))
    if opts.polish:
        polished = {}
        for lam in values:
            if roots[lam] == 1:
                p = _polish(g, lam, opts.refine_rel)
                polished[p if lo < p <= hi else lam] = 1
            else:
                # V-shaped sigma_min at a multiple root: the bracketing search resolves it further
                w = 2.0 * opts.refine_rel * max(1.0, abs(lam))
                tight, _ = _refine(g, lam - w, lam + w, 1e-15)
                polished[tight if lo < tight <= hi else lam] = roots[lam]
        roots = polished
        values = sorted(roots)

    found = int(sum(roots.values()))
    if found != exact:
        notes.append(f"found {found} eigenvalues, counting function reports {exact}")

    oracle_count = oracle_exact = None
    oracle_status = "skipped"
    if opts.oracle:
        oracle_count, oracle_exact, oracle_status = _oracle_certificate(g, lo, hi, n_lo, opts)

    cert = Certificate(
        found=found,
        exact_count=exact,
        weyl_estimate=_weyl(g, lo, hi),
        oracle_count=oracle_count,
        oracle_exact_count=oracle_exact,
        oracle_status=oracle_status,
        rescans=rescans,
        recovered=recovered,
        rejected=rejected,
        clusters=tuple(clusters),
        notes=tuple(notes),
    )
    return Spectrum(
        np.array(values, dtype=float),
        tuple(int(roots[v]) for v in values),
        (lo, hi),
        cert,
        start_index=n_lo + 1,
    )


def _missing_intervals(g: MetricGraph, lo: float, hi: float, roots: Sequence[float]):
    cuts = [lo]
    for r in roots:
        eps = JUMP_REL * max(1.0, abs(r))
        cuts.extend([r - eps, r + eps])
    cuts.append(hi)
    out = []
    for a, b in zip(cuts[0::2], cuts[1::2]):
        if b <= a:
            continue
        aa = a if a != lo else lo + 1e-12 * max(1.0, abs(lo))
        bb = b if b != hi else hi + 1e-12 * max(1.0, abs(hi))
        if eigenvalue_count(g, bb) - eigenvalue_count(g, aa) > 0:
            out.append((aa, bb))
    return out


def _oracle_certificate(g: MetricGraph, lo: float, hi: float, n_lo: int, opts: SolverOptions):
    from .oracle import fem_eigenvalues_below, default_mesh_width

    try:
        h = opts.oracle_h or default_mesh_width(g)
        fem = fem_eigenvalues_below(g, hi, h)
    except UnsupportedOracle:
        return None, None, "unsupported"
    except MemoryError:
        return None, None, "too large"
    exact_le_hi = count_at_most(g, hi)
    n_fem = int(fem.size)
    # conforming elements give upper bounds, so the discrete count can only lag
    if n_fem > exact_le_hi:
        status = "violated"
    elif n_fem == exact_le_hi:
        status = "consistent"
    else:
        status = "consistent (oracle lags near window top)"
    return n_fem, exact_le_hi, status


def ground_state_lower_bound(g: MetricGraph) -> float:
    """A value below the lowest eigenvalue, certified by the counting function."""
    from .oracle import fem_lowest, default_mesh_width

    try:
        lam1 = float(fem_lowest(g, default_mesh_width(g), 1)[0])
        lo = min(0.0, lam1 - 0.1 * abs(lam1) - 1.0)
    except UnsupportedOracle:
        vmin = min(min(e.potential.values) for e in g.edges)
        lo = min(0.0, vmin) - 1.0
    for _ in range(200):
        if eigenvalue_count(g, lo) == 0:
            return lo
        lo = 2.0 * lo - 1.0
    raise NumericalRefusal("E_NO_GROUND_BOUND", "could not find a lower bound for the spectrum")


def lowest_eigenvalues(g: MetricGraph, n: int, options: SolverOptions | None = None) -> Spectrum:
    """The eigenvalues up to and including ``lambda_n`` (whole final cluster)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lo = ground_state_lower_bound(g)
    vmax = max(max(e.potential.values) for e in g.edges)
    cmax = max(e.coefficient for e in g.edges)
    k = (n + g.n_edges + 1) * math.pi / g.effective_length
    hi = max(vmax, 0.0) + cmax * k * k + 1.0
    for _ in range(100):
        if count_at_most(g, hi) >= n:
            break
        hi = 2.0 * hi + 1.0
    spec = find_spectrum(g, (lo, hi), options)
    vals, mults = [], []
    total = 0
    for lam, m in zip(spec.values, spec.multiplicities):
        if total >= n:
            break
        vals.append(lam)
        mults.append(m)
        total += m
    top = vals[-1] if vals else hi
    return Spectrum(np.array(vals), tuple(mults), (lo, float(top)), spec.certificate, start_index=1)


# ---------------------------------------------------------------------------
# eigenfunctions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VertexTraces:
    F: np.ndarray
    Fp: np.ndarray


def _quadrature(edge, lam: float):
    """Gauss-Legendre nodes/weights on each constant piece of ``edge``."""
    xs, ws = [], []
    for x0, x1, V in edge.potential.pieces():
        ell = x1 - x0
        mu = (lam - V) / edge.coefficient
        n = 24 + int(2.0 * math.sqrt(abs(mu)) * ell)
        t, w = np.polynomial.legendre.leggauss(n)
        xs.append(x0 + 0.5 * ell * (t + 1.0))
        ws.append(0.5 * ell * w)
    return np.concatenate(xs), np.concatenate(ws)


def edge_gram(edge, lam: float) -> np.ndarray:
    """``[[int c^2, int c s], [int s c, int s^2]]`` over the edge, weighted by 1/sqrt(coefficient)."""
    x, w = _quadrature(edge, lam)
    T = edge_transfer_at(edge, lam, x)
    c, s = T[:, 0, 0], T[:, 0, 1]
    wt = w / math.sqrt(edge.coefficient)
    return np.array([[np.sum(wt * c * c), np.sum(wt * c * s)], [np.sum(wt * s * c), np.sum(wt * s * s)]])


@dataclass(frozen=True, eq=False)
class Eigenfunction:
    """``f = a_e c + b_e s`` on each edge; normalized in L2 of the graph.

    On edges with a coefficient ``c != 1`` the norm is the weighted one,
    ``int |f|^2 / sqrt(c)``, in which the operator is self-adjoint.
    """

    graph: MetricGraph
    lam: float
    coefficients: np.ndarray  # shape (E, 2)

    def evaluate(self, eid: str, x):
        """``(f(x), f'(x))`` on edge ``eid``."""
        e = self.graph.edge(eid)
        a, b = self.coefficients[self.graph.edge_index(eid)]
        T = edge_transfer_at(e, self.lam, np.asarray(x, dtype=float))
        f = a * T[..., 0, 0] + b * T[..., 0, 1]
        fp = a * T[..., 1, 0] + b * T[..., 1, 1]
        return f, fp

    def sample(self, eid: str, n: int = 101):
        x = np.linspace(0.0, self.graph.edge(eid).length, n)
        f, fp = self.evaluate(eid, x)
        return x, f, fp

    def wronskian_defect(self, eid: str, x) -> float:
        e = self.graph.edge(eid)
        T = edge_transfer_at(e, self.lam, np.asarray(x, dtype=float))
        W = T[..., 0, 0] * T[..., 1, 1] - T[..., 1, 0] * T[..., 0, 1]
        return float(np.max(np.abs(W - 1.0)))

    def vertex_traces(self, vid: str) -> VertexTraces:
        F, Fp = [], []
        for end in self.graph.ends(vid):
            e = self.graph.edges[end.edge_index]
            x = 0.0 if end.role == 0 else e.length
            f, fp = self.evaluate(e.id, x)
            F.append(f)
            Fp.append(fp if end.role == 0 else -fp)
        return VertexTraces(np.array(F), np.array(Fp))

    def vertex_value(self, vid: str):
        """Mean of the edge-end values at ``vid`` (the value if continuous)."""
        return np.mean(self.vertex_traces(vid).F)

    def derivative_sum(self, vid: str):
        return np.sum(self.vertex_traces(vid).Fp)

    def residual(self, vid: str) -> float:
        ab = cnd.orthonormal_rows(self.graph.ab(vid))
        t = self.vertex_traces(vid)
        return float(np.linalg.norm(ab.A @ t.F + ab.B @ t.Fp))

    def max_residual(self) -> float:
        return max(self.residual(v) for v in self.graph.vertex_ids)

    def norm(self) -> float:
        total = 0.0
        for i, e in enumerate(self.graph.edges):
            G = edge_gram(e, self.lam)
            x = self.coefficients[i]
            total += float(np.real(np.conj(x) @ G @ x))
        return math.sqrt(total)

    def sup_norm(self, points_per_edge: int = 400) -> float:
        best = 0.0
        for e in self.graph.edges:
            k = local_wavenumber(e, self.lam)
            n = max(points_per_edge, int(8 * k * e.length / math.pi) + 2)
            _, f, _ = self.sample(e.id, n)
            best = max(best, float(np.max(np.abs(f))))
        return best


def _gram(g: MetricGraph, lam: float, X: np.ndarray) -> np.ndarray:
    m = X.shape[1]
    G = np.zeros((m, m), dtype=X.dtype)
    for i, e in enumerate(g.edges):
        Ge = edge_gram(e, lam)
        Xe = X[2 * i : 2 * i + 2]
        G += Xe.conj().T @ Ge @ Xe
    return 0.5 * (G + G.conj().T)


def eigenfunctions(
    g: MetricGraph,
    lam: float,
    *,
    multiplicity: int | None = None,
    tau_eig: float = TAU_EIG,
    tau_mult: float = TAU_MULT,
) -> list[Eigenfunction]:
    """An L2-orthonormal basis of the eigenspace at ``lam``."""
    sm = assemble_secular(g, lam)
    Me = sm.scaled
    u, sv, vh = np.linalg.svd(Me)
    if sv[-1] > tau_eig * sv[0]:
        raise NumericalRefusal(
            "E_NOT_EIGENVALUE",
            f"lambda = {lam!r} is not an eigenvalue (sigma_min = {sv[-1]:.3e})",
            sigma_min=float(sv[-1]),
        )
    if multiplicity is None:
        multiplicity = max(1, int(np.sum(sv <= tau_mult * sv[0])))
    Y = vh[-multiplicity:].conj().T
    X = sm.column_scale[:, None] * Y
    G = _gram(g, lam, X)
    Lc = np.linalg.cholesky(G)
    X = X @ np.linalg.inv(Lc).conj().T
    out = []
    for j in range(multiplicity):
        x = X[:, j]
        k = int(np.argmax(np.abs(x)))
        phase = x[k] / abs(x[k])
        x = x / phase
        if not np.iscomplexobj(Me) or np.max(np.abs(np.imag(x))) < 1e-12 * np.max(np.abs(x)):
            x = np.real(x)
        out.append(Eigenfunction(g, float(lam), np.array(x).reshape(g.n_edges, 2)))
    return out


def eigenfunction(g: MetricGraph, lam: float, **kw) -> list[Eigenfunction]:
    """Alias of :func:`eigenfunctions`."""
    return eigenfunctions(g, lam, **kw)
