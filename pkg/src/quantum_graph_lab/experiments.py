"""Numerical experiments: variational formulas, interlacing, the spiral, nodal counts.

Every check returns a report dataclass with the raw numbers next to the
verdict, so a failure can be inspected rather than just observed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import conditions as cnd
from .conditions import INFINITY, CirclePoint, Delta, ExtendedDeltaAngle
from .errors import NumericalRefusal, StructuralError
from .graph import MetricGraph, glue_group, set_dirichlet
from .secular import (
    SolverOptions,
    Spectrum,
    eigenfunctions,
    find_spectrum,
    ground_state_lower_bound,
    lowest_eigenvalues,
)

TAU_INT = 1e-9
TAU_NODAL = 1e-8
STRICT_GAP = 1e-8


def _first(g: MetricGraph, count: int, options=None) -> tuple[np.ndarray, Spectrum]:
    spec = lowest_eigenvalues(g, count, options)
    return spec.eigenvalues[:count], spec


def _multiplicity_at(spec: Spectrum, lam: float, rel: float = 1e-9) -> int:
    for v, m in zip(spec.values, spec.multiplicities):
        if abs(v - lam) <= rel * max(1.0, abs(lam)):
            return int(m)
    return 0


def _require_delta(g: MetricGraph, v: str, finite: bool = False) -> None:
    cond = g.condition(v)
    alpha = cnd.delta_parameter(cond)
    if alpha is None:
        raise StructuralError("E_PRECONDITION", f"vertex {v!r} does not carry a delta-type condition")
    if finite and alpha is INFINITY:
        raise StructuralError("E_PRECONDITION", f"vertex {v!r} is Dirichlet; a finite coupling is required")


# ---------------------------------------------------------------------------
# interlacing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainCheck:
    n: int
    values: tuple[float, ...]
    slacks: tuple[float, ...]
    passed: bool


@dataclass(frozen=True)
class StrictCheck:
    n: int
    witness: str
    f_v: float
    flux_v: float
    gaps: tuple[float, float]
    passed: bool


@dataclass(frozen=True)
class InterlacingReport:
    kind: str
    depth: int
    spectra: dict
    chains: tuple[ChainCheck, ...]
    strict: tuple[StrictCheck, ...] = ()
    skipped_strict: tuple[tuple[int, str], ...] = ()
    tau_int: float = TAU_INT
    shift: int = 1

    @property
    def min_slack(self) -> float:
        return min(min(c.slacks) for c in self.chains)

    @property
    def chains_hold(self) -> bool:
        return all(c.passed for c in self.chains)

    @property
    def strict_hold(self) -> bool:
        return all(s.passed for s in self.strict)

    @property
    def passed(self) -> bool:
        return self.chains_hold and self.strict_hold


def interlace_check(
    g: MetricGraph,
    v: str,
    alpha: float,
    alpha_prime,
    depth: int = 15,
    *,
    options: SolverOptions | None = None,
    tau_int: float = TAU_INT,
    tau_nodal: float = TAU_NODAL,
    strict_gap: float = STRICT_GAP,
) -> InterlacingReport:
    """Chains lambda_n(a) <= lambda_n(a') <= lambda_n(inf) <= lambda_{n+1}(a).

    Strict inequalities lambda_n(a) < lambda_n(a') < lambda_{n+1}(a) are
    checked where lambda_n(a') is simple and its eigenfunction has
    ``|f(v)|`` or ``|sum f'(v)|`` above ``tau_nodal * ||f||_inf``.
    """
    _require_delta(g, v)
    alpha = float(alpha)
    alpha_prime = cnd.coerce_alpha(alpha_prime)
    if not math.isfinite(alpha):
        raise StructuralError("E_PRECONDITION", "alpha must be finite")
    if alpha_prime is not INFINITY and not alpha < alpha_prime:
        raise StructuralError("E_PRECONDITION", f"need alpha < alpha' (got {alpha} and {alpha_prime})")

    g_a = g.with_condition(v, Delta(alpha))
    g_ap = g.with_condition(v, Delta(alpha_prime))
    g_inf = set_dirichlet(g, v)
    lam_a, _ = _first(g_a, depth + 1, options)
    lam_ap, spec_ap = _first(g_ap, depth, options)
    lam_inf, _ = _first(g_inf, depth, options)

    chains = []
    for n in range(1, depth + 1):
        vals = (lam_a[n - 1], lam_ap[n - 1], lam_inf[n - 1], lam_a[n])
        slacks = tuple(float(b - a) for a, b in zip(vals[:-1], vals[1:]))
        chains.append(ChainCheck(n, tuple(float(x) for x in vals), slacks, all(s >= -tau_int for s in slacks)))

    strict, skipped = [], []
    for n in range(1, depth + 1):
        lam = float(lam_ap[n - 1])
        if _multiplicity_at(spec_ap, lam) != 1:
            skipped.append((n, "multiple eigenvalue"))
            continue
        f = eigenfunctions(g_ap, lam, multiplicity=1)[0]
        fv = abs(f.vertex_value(v))
        flux = abs(f.derivative_sum(v))
        thresh = tau_nodal * f.sup_norm()
        names = [name for name, val in (("f(v)", fv), ("sum f'(v)", flux)) if val > thresh]
        if not names:
            skipped.append((n, "no witness above tau_nodal"))
            continue
        gaps = (float(lam - lam_a[n - 1]), float(lam_a[n] - lam))
        strict.append(StrictCheck(n, " and ".join(names), fv, flux, gaps, min(gaps) >= strict_gap))

    return InterlacingReport(
        "coupling",
        depth,
        {"alpha": lam_a, "alpha_prime": lam_ap, "dirichlet": lam_inf},
        tuple(chains),
        tuple(strict),
        tuple(skipped),
        tau_int,
    )


def _merge_groups(groups: Sequence[Sequence[str]]) -> list[list[str]]:
    parent: dict[str, str] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            x = parent[x]
        return x

    order = []
    for grp in groups:
        for x in grp:
            if x not in parent:
                order.append(x)
            find(x)
        for x in grp[1:]:
            a, b = find(grp[0]), find(x)
            if a != b:
                parent[b] = a
    merged: dict[str, list[str]] = {}
    for x in order:
        merged.setdefault(find(x), []).append(x)
    return [m for m in merged.values() if len(m) > 1]


def glue_check(
    g: MetricGraph,
    groups: Sequence[Sequence[str]],
    depth: int = 10,
    *,
    options: SolverOptions | None = None,
    tau_int: float = TAU_INT,
) -> InterlacingReport:
    """lambda_n(G) <= lambda_n(G') <= lambda_{n+k}(G) after k identifications.

    ``groups`` lists vertex sets to identify (pairs or larger groups;
    overlapping sets are merged).  Each set of size ``m`` counts as
    ``m - 1`` identifications.
    """
    merged = _merge_groups(groups)
    if not merged:
        raise StructuralError("E_PRECONDITION", "nothing to glue")
    g2 = g
    k = 0
    for grp in merged:
        g2 = glue_group(g2, grp)
        k += len(grp) - 1
    lam, _ = _first(g, depth + k, options)
    lam2, _ = _first(g2, depth, options)
    chains = []
    for n in range(1, depth + 1):
        vals = (lam[n - 1], lam2[n - 1], lam[n - 1 + k])
        slacks = (float(vals[1] - vals[0]), float(vals[2] - vals[1]))
        chains.append(ChainCheck(n, tuple(float(x) for x in vals), slacks, all(s >= -tau_int for s in slacks)))
    return InterlacingReport("gluing", depth, {"original": lam, "glued": lam2}, tuple(chains), tau_int=tau_int, shift=k)


# ---------------------------------------------------------------------------
# variational (Hadamard) formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HadamardReport:
    parameter: str
    where: str
    n: int
    at: float
    lam: float
    h_fd: float
    finite_difference: float
    formula: float
    index_consistent: bool

    @property
    def mismatch(self) -> float:
        return abs(self.finite_difference - self.formula)

    @property
    def relative_mismatch(self) -> float:
        return self.mismatch / max(abs(self.formula), 1e-300)

    @property
    def noise_floor(self) -> float:
        """Rough size of the difference quotient's rounding error."""
        return 10.0 * np.finfo(float).eps * max(1.0, abs(self.lam)) / self.h_fd


@dataclass(frozen=True)
class ConvergenceReport:
    h: float
    coarse: HadamardReport
    fine: HadamardReport

    @property
    def ratio(self) -> float:
        return self.coarse.mismatch / max(self.fine.mismatch, 1e-300)

    @property
    def conclusive(self) -> bool:
        return self.fine.mismatch > 10.0 * self.fine.noise_floor

    def passed(self, lo: float = 3.5, hi: float = 4.5) -> bool:
        return lo <= self.ratio <= hi


def _simple_eigenpair(g: MetricGraph, n: int, options=None):
    lam_all, spec = _first(g, n + 1, options)
    lam = float(lam_all[n - 1])
    m = _multiplicity_at(spec, lam)
    if m != 1:
        raise NumericalRefusal("E_MULTIPLE", f"lambda_{n} = {lam!r} has multiplicity {m}", multiplicity=m)
    below = float(lam_all[n - 2]) if n >= 2 else lam - 1.0 - abs(lam)
    above = float(lam_all[n])
    f = eigenfunctions(g, lam, multiplicity=1)[0]
    return lam, f, 0.5 * (below + lam), 0.5 * (lam + above)


def _track(g: MetricGraph, lam_ref: float, n: int, window: tuple[float, float]) -> tuple[float, bool]:
    """The eigenvalue of ``g`` matching ``lam_ref`` within the interlacing window."""
    spec = find_spectrum(g, window, SolverOptions(oracle=False))
    rows = spec.indexed()
    if not rows:
        raise NumericalRefusal("E_TRACKING", f"no eigenvalue left in {window}; reduce the step", window=window)
    idx, lam, _ = min(rows, key=lambda r: abs(r[1] - lam_ref))
    return lam, idx == n


def _fd(g_minus, g_plus, lam, n, window, h):
    lm, ok_m = _track(g_minus, lam, n, window)
    lp, ok_p = _track(g_plus, lam, n, window)
    return (lp - lm) / (2.0 * h), ok_m and ok_p


def default_step(parameter: float) -> float:
    return 1e-4 * max(1.0, abs(parameter))


def hadamard_length_check(
    g: MetricGraph, eid: str, n: int, h_fd: float | None = None, *, options=None
) -> HadamardReport:
    """d lambda_n / dL_e against -|f'(end)|^2 for a pendant Dirichlet edge."""
    e = g.edge(eid)
    tip = None
    for end_v in (e.w, e.u):
        if g.degree(end_v) == 1 and cnd.delta_parameter(g.condition(end_v)) is INFINITY:
            tip = end_v
            break
    if tip is None or e.is_loop:
        raise StructuralError("E_PRECONDITION", f"edge {eid!r} does not end at a degree-one Dirichlet vertex")
    if e.coefficient != 1.0:
        raise StructuralError("E_PRECONDITION", "length formula is for unit edge coefficients")
    s = e.length
    h = h_fd or default_step(s)
    if h >= s:
        raise StructuralError("E_PRECONDITION", "finite-difference step exceeds the edge length")
    lam, f, lo, hi = _simple_eigenpair(g, n, options)
    fp = f.vertex_traces(tip).Fp[0]
    formula = -abs(fp) ** 2
    fd, ok = _fd(g.with_edge_length(eid, s - h, at=tip), g.with_edge_length(eid, s + h, at=tip), lam, n, (lo, hi), h)
    return HadamardReport("length", eid, n, s, lam, h, fd, formula, ok)


def _zeta_of(cond) -> float:
    alpha = cnd.delta_parameter(cond)
    if alpha is INFINITY:
        return 0.0
    if alpha == 0:
        raise StructuralError("E_PRECONDITION", "Neumann point has zeta = infinity")
    return -1.0 / float(alpha)


def zeta_condition(zeta: float) -> ExtendedDeltaAngle:
    """``zeta * sum f' = -f`` as an extended delta angle (zeta = 0 is Dirichlet)."""
    return ExtendedDeltaAngle(math.atan2(-1.0, zeta))


def hadamard_alpha_check(
    g: MetricGraph,
    v: str,
    n: int,
    h_fd: float | None = None,
    *,
    parameter: str = "alpha",
    at: float | None = None,
    options=None,
) -> HadamardReport:
    """d lambda_n / d alpha = |f(v)|^2, or d lambda_n / d zeta = |sum f'(v)|^2.

    ``at`` overrides the current parameter value at ``v``; the zeta form
    ``zeta sum f' = -f`` reaches the Dirichlet point at zeta = 0.
    """
    _require_delta(g, v)
    if parameter == "alpha":
        a0 = float(at) if at is not None else cnd.delta_parameter(g.condition(v))
        if a0 is INFINITY:
            raise StructuralError("E_PRECONDITION", "alpha derivative needs a finite coupling; use parameter='zeta'")
        make = lambda a: g.with_condition(v, Delta(a))
    elif parameter == "zeta":
        a0 = float(at) if at is not None else _zeta_of(g.condition(v))
        make = lambda z: g.with_condition(v, zeta_condition(z))
    else:
        raise ValueError(f"unknown parameter {parameter!r}")
    h = h_fd or default_step(a0)
    g0 = make(a0)
    lam, f, lo, hi = _simple_eigenpair(g0, n, options)
    if parameter == "alpha":
        formula = abs(f.vertex_value(v)) ** 2
    else:
        formula = abs(f.derivative_sum(v)) ** 2
    fd, ok = _fd(make(a0 - h), make(a0 + h), lam, n, (lo, hi), h)
    return HadamardReport(parameter, v, n, a0, lam, h, fd, formula, ok)


def convergence(check, h: float, **kw) -> ConvergenceReport:
    """Run ``check(..., h_fd=h)`` and ``h/2``; the mismatch ratio should be near 4."""
    return ConvergenceReport(h, check(h_fd=h, **kw), check(h_fd=h / 2.0, **kw))


# ---------------------------------------------------------------------------
# spectral spiral
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpiralPoint:
    theta: float
    alpha: object
    branch_id: int
    lam: float
    in_delta: bool


@dataclass(frozen=True)
class Junction:
    """Branch ``upper`` (theta -> pi from below) meets ``lower`` (theta -> pi from above)."""

    lower: int
    upper: int
    dirichlet_value: float
    lower_near: float | None
    upper_near: float | None
    connected: bool


@dataclass(frozen=True)
class DeltaWitness:
    lam: float
    multiplicity: int
    f_v: float
    flux_v: float


@dataclass(frozen=True)
class SpiralTrace:
    vertex: str
    thetas: np.ndarray
    window: tuple[float, float]
    spectra: tuple[Spectrum, ...]
    delta_persistent: tuple[tuple[float, int], ...]
    delta_intersection: tuple[tuple[float, int], ...]
    delta_witnesses: tuple[DeltaWitness, ...]
    branches: dict
    monotone: dict
    strictly_monotone: dict
    orientation: str
    junctions: tuple[Junction, ...]
    points: tuple[SpiralPoint, ...]
    notes: tuple[str, ...] = ()

    @property
    def delta_agree(self) -> bool:
        a, b = self.delta_persistent, self.delta_intersection
        if len(a) != len(b):
            return False
        return all(abs(x[0] - y[0]) <= 1e-8 * max(1.0, abs(x[0])) and x[1] == y[1] for x, y in zip(a, b))

    @property
    def observed_connected(self) -> bool:
        return all(j.connected for j in self.junctions)

    def rows_at(self, theta: float) -> list[SpiralPoint]:
        return [p for p in self.points if p.theta == theta]


def _multiset_intersection(a: Spectrum, b: Spectrum, rel: float = 1e-8) -> list[tuple[float, int]]:
    out = []
    for va, ma in zip(a.values, a.multiplicities):
        for vb, mb in zip(b.values, b.multiplicities):
            if abs(va - vb) <= rel * max(1.0, abs(va)):
                out.append((float(va), int(min(ma, mb))))
    return out


def _theta_alpha(theta: float):
    return cnd.alpha_of_theta(theta)


def spiral_trace(
    g: MetricGraph,
    v: str,
    theta_steps: int = 64,
    window: tuple[float, float] = (-5.0, 60.0),
    *,
    tau_int: float = TAU_INT,
    match_rel: float = 1e-8,
) -> SpiralTrace:
    """Spectra of the extended delta family at ``v`` over a theta grid.

    Branches are labelled by the index of the eigenvalue once the
    theta-independent set Delta is removed.  On the arc theta in (pi, 3pi)
    where the coupling alpha(theta) = -tan(theta/2) is finite, branch
    ``m`` is the ``m``-th non-Delta eigenvalue; at theta = pi branch ``m``
    ends in the ``(m-1)``-st Dirichlet value, where branch ``m-1`` starts.
    """
    _require_delta(g, v)
    if theta_steps < 4:
        raise StructuralError("E_PRECONDITION", "need at least 4 theta steps")
    lo, hi = map(float, window)
    opts = SolverOptions(oracle=False)
    thetas = 2.0 * math.pi * np.arange(theta_steps) / theta_steps
    graphs = [g.with_condition(v, CirclePoint(float(t))) for t in thetas]
    spectra = [find_spectrum(gt, (lo, hi), opts) for gt in graphs]

    g_N = g.with_condition(v, Delta(0.0))
    g_D = set_dirichlet(g, v)
    spec_N = spectra[0]
    dir_idx = theta_steps // 2 if theta_steps % 2 == 0 else None
    spec_D = spectra[dir_idx] if dir_idx is not None else find_spectrum(g_D, (lo, hi), opts)

    # Delta two ways
    inter = _multiset_intersection(spec_N, spec_D, match_rel)
    persistent = []
    for val, _ in zip(spec_N.values, spec_N.multiplicities):
        mult = None
        for sp in spectra + [spec_D]:
            m = sum(mm for vv, mm in zip(sp.values, sp.multiplicities) if abs(vv - val) <= match_rel * max(1.0, abs(val)))
            mult = m if mult is None else min(mult, m)
        if mult:
            persistent.append((float(val), int(mult)))

    witnesses = []
    for val, m in inter:
        basis = eigenfunctions(g_D, val)
        flux = np.array([f.derivative_sum(v) for f in basis])
        if len(basis) >= 2:
            # combination with vanishing derivative sum
            null = np.linalg.svd(flux.reshape(1, -1))[2][-1].conj()
            coeffs = np.tensordot(null, np.array([f.coefficients for f in basis]), axes=1)
            f = type(basis[0])(g_D, basis[0].lam, coeffs)
        else:
            f = basis[0]
        witnesses.append(DeltaWitness(val, m, float(abs(f.vertex_value(v))), float(abs(f.derivative_sum(v)))))

    # Delta members below the window shift the non-Delta index
    notes = []
    delta_below = 0
    floor = min(ground_state_lower_bound(g_N), ground_state_lower_bound(g_D))
    if lo > floor:
        below = _multiset_intersection(find_spectrum(g_N, (floor, lo), opts), find_spectrum(g_D, (floor, lo), opts), match_rel)
        delta_below = sum(m for _, m in below)

    delta_vals = [d for d, _ in persistent]

    def split(sp: Spectrum):
        """(non-Delta list of (global non-Delta index, value), Delta list of (value, id))."""
        rows = []
        n = sp.start_index
        for val, m in zip(sp.values, sp.multiplicities):
            rows.extend([float(val)] * m)
        remaining = dict(persistent)
        non, dl = [], []
        delta_seen = delta_below
        for k, val in enumerate(rows):
            hit = next((d for d in delta_vals if abs(d - val) <= match_rel * max(1.0, abs(val)) and remaining.get(d, 0) > 0), None)
            if hit is not None:
                remaining[hit] -= 1
                dl.append((val, -(delta_vals.index(hit) + 1)))
                delta_seen += 1
            else:
                non.append((n + k - delta_seen, val))
        return non, dl

    points = []
    branches: dict[int, list] = {}
    for t, sp in zip(thetas, spectra):
        alpha = _theta_alpha(float(t))
        non, dl = split(sp)
        for m, val in non:
            points.append(SpiralPoint(float(t), alpha, m, val, False))
            branches.setdefault(m, []).append((float(t), alpha, val))
        for val, bid in dl:
            points.append(SpiralPoint(float(t), alpha, bid, val, True))

    monotone, strict = {}, {}
    signs = []
    for m, pts in branches.items():
        arc = sorted((p for p in pts if p[1] is not INFINITY), key=lambda p: p[1])
        diffs = np.diff([p[2] for p in arc])
        monotone[m] = bool(np.all(diffs >= -tau_int))
        strict[m] = bool(np.all(diffs > 0))
        # orientation: lambda along increasing theta on the arc (pi, 3pi)
        by_theta = sorted(
            (p for p in pts if p[1] is not INFINITY), key=lambda p: (p[0] - math.pi) % (2 * math.pi)
        )
        signs.extend(np.sign(np.diff([p[2] for p in by_theta])))
    if signs and all(s < 0 for s in signs):
        orientation = "decreasing counter-clockwise"
    elif signs and all(s > 0 for s in signs):
        orientation = "increasing counter-clockwise"
    else:
        orientation = "mixed" if signs else "undetermined"

    # connectivity through the Dirichlet point
    junctions = []
    non_D, _ = split(spec_D)
    before = max((t for t in thetas if t < math.pi - 1e-12), default=None)
    after = min((t for t in thetas if t > math.pi + 1e-12), default=None)
    dvals = dict(non_D)
    for m, dval in non_D:
        upper = m + 1
        lower_pts = [p[2] for p in branches.get(m, []) if p[0] == after]
        upper_pts = [p[2] for p in branches.get(upper, []) if p[0] == before]
        lower_near = lower_pts[0] if lower_pts else None
        upper_near = upper_pts[0] if upper_pts else None
        prev_d = dvals.get(m - 1, -math.inf)
        next_d = dvals.get(m + 1, math.inf)
        ok = True
        if lower_near is not None:
            ok &= prev_d - tau_int <= lower_near <= dval + tau_int
        if upper_near is not None:
            ok &= dval - tau_int <= upper_near <= next_d + tau_int
        if lower_near is None and upper_near is None:
            ok = False
        junctions.append(Junction(m, upper, dval, lower_near, upper_near, bool(ok)))
    if dir_idx is None:
        notes.append("theta = pi not on the grid; Dirichlet spectrum computed separately")

    return SpiralTrace(
        v,
        thetas,
        (lo, hi),
        tuple(spectra),
        tuple(persistent),
        tuple(inter),
        tuple(witnesses),
        branches,
        monotone,
        strict,
        orientation,
        tuple(junctions),
        tuple(points),
        tuple(notes),
    )


# ---------------------------------------------------------------------------
# nodal counts and simplicity on trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodalReport:
    n: int
    lam: float
    multiplicity: int
    zeros: dict
    vertex_values: dict
    total: int | None
    violations: tuple[str, ...]

    @property
    def hypotheses_ok(self) -> bool:
        return not self.violations

    @property
    def expected(self) -> int:
        return self.n - 1

    @property
    def passed(self) -> bool | None:
        if not self.hypotheses_ok:
            return None
        return self.total == self.expected


def _check_tree(g: MetricGraph) -> None:
    if not g.is_tree():
        raise StructuralError("E_NOT_TREE", "nodal counting is only defined for trees")
    for vid in g.vertex_ids:
        cond = g.condition(vid)
        alpha = cnd.delta_parameter(cond)
        if alpha is None:
            raise StructuralError("E_PRECONDITION", f"vertex {vid!r} needs a delta-type condition")
        if g.degree(vid) > 1 and alpha is INFINITY:
            raise StructuralError("E_PRECONDITION", f"internal vertex {vid!r} must have a finite coupling")


def _is_dirichlet(g: MetricGraph, vid: str) -> bool:
    return cnd.delta_parameter(g.condition(vid)) is INFINITY


def _edge_zeros(f, e, skip_start: bool, skip_end: bool, vertex_tol: float = 1e-10):
    """Interior sign changes of ``f`` on edge ``e``, refined by bisection."""
    from scipy.optimize import brentq

    from .fundamental import local_wavenumber

    k = max(local_wavenumber(e, f.lam), 1.0)
    per_wave = 8
    npts = max(33, int(math.ceil(per_wave * k * e.length / (2 * math.pi))) * 2 + 1)
    x = np.linspace(0.0, e.length, npts)
    y, _ = f.evaluate(e.id, x)
    y = np.real(y)
    if skip_start:
        x, y = x[1:], y[1:]
    if skip_end:
        x, y = x[:-1], y[:-1]
    zeros, at_vertex = [], False
    for i in range(len(x) - 1):
        if y[i] == 0.0:
            zeros.append(float(x[i]))
            continue
        if y[i] * y[i + 1] < 0:
            z = brentq(lambda t: float(np.real(f.evaluate(e.id, t)[0])), x[i], x[i + 1], xtol=1e-14)
            zeros.append(z)
    if y.size and y[-1] == 0.0:
        zeros.append(float(x[-1]))
    zeros = sorted(set(zeros))
    for z in zeros:
        if (not skip_start and z < vertex_tol) or (not skip_end and z > e.length - vertex_tol):
            at_vertex = True
    return zeros, at_vertex


def nodal_count(
    g: MetricGraph,
    n: int,
    *,
    tau_nodal: float = TAU_NODAL,
    options=None,
) -> NodalReport:
    """Count interior zeros of the n-th eigenfunction of a tree.

    Hypotheses (checked, never assumed): ``lambda_n`` simple and ``f``
    nonzero at every vertex that does not carry a Dirichlet condition.
    Dirichlet leaves vanish by definition and are not counted as zeros.
    """
    _check_tree(g)
    lam_all, spec = _first(g, n, options)
    return _nodal(g, n, lam_all, spec, tau_nodal)


def nodal_counts(g: MetricGraph, n_max: int, *, tau_nodal: float = TAU_NODAL, options=None) -> list[NodalReport]:
    """:func:`nodal_count` for ``n = 1..n_max`` from a single spectrum."""
    _check_tree(g)
    lam_all, spec = _first(g, n_max, options)
    return [_nodal(g, n, lam_all, spec, tau_nodal) for n in range(1, n_max + 1)]


def _nodal(g: MetricGraph, n: int, lam_all, spec: Spectrum, tau_nodal: float) -> NodalReport:
    lam = float(lam_all[n - 1])
    mult = _multiplicity_at(spec, lam)
    violations = []
    if mult != 1:
        violations.append(f"multiplicity {mult}")
        return NodalReport(n, lam, mult, {}, {}, None, tuple(violations))
    f = eigenfunctions(g, lam, multiplicity=1)[0]
    thresh = tau_nodal * f.sup_norm()
    values = {}
    for vid in g.vertex_ids:
        if _is_dirichlet(g, vid):
            continue
        val = float(abs(f.vertex_value(vid)))
        values[vid] = val
        if val <= thresh:
            violations.append(f"|f({vid})| = {val:.3e} <= tau_nodal")
    zeros = {}
    total = 0
    for e in g.edges:
        zs, at_vertex = _edge_zeros(f, e, _is_dirichlet(g, e.u), _is_dirichlet(g, e.w))
        if at_vertex:
            violations.append(f"zero within 1e-10 of a vertex on edge {e.id}")
        zeros[e.id] = zs
        total += len(zs)
    return NodalReport(n, lam, mult, zeros, values, None if violations else total, tuple(violations))


@dataclass(frozen=True)
class SimplicityReport:
    lam: float
    multiplicity: int
    nonvanishing_found: bool
    vanishing_vertex: str | None

    @property
    def consistent(self) -> bool:
        """A nonvanishing eigenfunction forces simplicity; multiplicity forces a common zero."""
        if self.nonvanishing_found:
            return self.multiplicity == 1
        return self.multiplicity == 1 or self.vanishing_vertex is not None


def simplicity_check(
    g: MetricGraph, lam: float, *, tau_nodal: float = TAU_NODAL, trials: int = 32, seed: int = 0
) -> SimplicityReport:
    """Search the eigenspace for a function nonzero at all internal vertices."""
    _check_tree(g)
    basis = eigenfunctions(g, lam)
    internal = g.internal_vertices()
    vals = np.array([[f.vertex_value(v) for v in internal] for f in basis]).reshape(len(basis), len(internal))
    sup = max(f.sup_norm() for f in basis)
    thresh = tau_nodal * sup
    rng = np.random.default_rng(seed)
    combos = [np.eye(len(basis))[i] for i in range(len(basis))]
    combos += [rng.standard_normal(len(basis)) for _ in range(trials)]
    found = False
    for c in combos:
        c = c / np.linalg.norm(c)
        if internal and np.all(np.abs(c @ vals) > thresh):
            found = True
            break
    if not internal:
        found = True
    vanishing = None
    for j, v in enumerate(internal):
        if np.all(np.abs(vals[:, j]) <= thresh):
            vanishing = v
            break
    return SimplicityReport(float(lam), len(basis), found, vanishing)
