"""Acceptance suite: one criterion marker per check, with wall-clock budgets.

The terminal summary prints one PASS/FAIL line per criterion.
"""

import math

import numpy as np
import pytest

from quantum_graph_lab import conditions as cnd
from quantum_graph_lab import generators as gen
from quantum_graph_lab.errors import NumericalRefusal
from quantum_graph_lab.experiments import (
    convergence,
    glue_check,
    hadamard_alpha_check,
    hadamard_length_check,
    interlace_check,
    nodal_counts,
    spiral_trace,
)
from quantum_graph_lab.graph import rescale
from quantum_graph_lab.oracle import convergence_slope, fem_sequence, richardson_all
from quantum_graph_lab.secular import find_spectrum, lowest_eigenvalues

PI2 = math.pi**2

pytestmark = pytest.mark.acceptance


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(1.0, np.abs(b))


# ---------------------------------------------------------------------------
# 1. closed-form spectra
# ---------------------------------------------------------------------------


@pytest.mark.criterion(1, "closed-form spectra")
def test_c1_dirichlet_interval(budget):
    with budget(1.0):
        lam = lowest_eigenvalues(gen.interval(), 20).eigenvalues[:20]
    exact = (np.arange(1, 21) * math.pi) ** 2
    assert np.all(np.abs(lam - exact) / exact <= 1e-8)


@pytest.mark.criterion(1, "closed-form spectra")
def test_c1_neumann_interval(budget):
    with budget(1.0):
        sp = lowest_eigenvalues(gen.interval(1.0, cnd.NEUMANN, cnd.NEUMANN), 5)
    assert abs(sp.values[0]) <= 1e-12
    assert sp.multiplicities[0] == 1
    assert np.allclose(sp.eigenvalues[:5], (np.arange(5) * math.pi) ** 2, rtol=1e-8, atol=1e-12)


@pytest.mark.criterion(1, "closed-form spectra")
def test_c1_equilateral_star(budget):
    with budget(1.0):
        sp = find_spectrum(gen.star([1.0, 1.0, 1.0]), (-1.0, 4 * PI2 + 1.0))
    assert sp.multiplicities == (1, 2, 1, 2)
    assert np.all(_rel(sp.values, [PI2 / 4, PI2, 9 * PI2 / 4, 4 * PI2]) <= 1e-8)


# ---------------------------------------------------------------------------
# 2. length derivative at a pendant Dirichlet edge
# ---------------------------------------------------------------------------


@pytest.mark.criterion(2, "Hadamard length formula")
def test_c2_length_formula(budget):
    cases = [(gen.interval(), "e1", -2 * PI2), (gen.star([1.0, 1.3, 1.7]), "e1", None)]
    with budget(5.0):
        for g, eid, closed in cases:
            conv = convergence(lambda **kw: hadamard_length_check(g, eid, 1, **kw), 1e-4)
            r = conv.coarse
            assert r.h_fd == 1e-4
            assert r.relative_mismatch <= 1e-4
            if closed is not None:
                assert r.formula == pytest.approx(closed, rel=1e-10)
            assert conv.conclusive, (eid, conv.fine.mismatch, conv.fine.noise_floor)
            assert 3.5 <= conv.ratio <= 4.5, conv.ratio


# ---------------------------------------------------------------------------
# 3. coupling derivatives
# ---------------------------------------------------------------------------


@pytest.mark.criterion(3, "Hadamard alpha and zeta formulas")
def test_c3_closed_forms(budget):
    g = gen.interval(1.0, cnd.DIRICHLET, cnd.NEUMANN)
    with budget(10.0):
        ra = hadamard_alpha_check(g, "b", 1, parameter="alpha", at=0.0)
        rz = hadamard_alpha_check(g, "b", 1, parameter="zeta", at=0.0)
    # f = sqrt(2) sin(pi x / 2) and, at the Dirichlet point, f' (1) = -sqrt(2) pi
    assert abs(ra.finite_difference - 2.0) <= 1e-6
    assert abs(ra.formula - 2.0) <= 1e-12
    assert abs(rz.finite_difference - 2 * PI2) <= 1e-6 * 2 * PI2
    assert rz.formula == pytest.approx(2 * PI2, rel=1e-10)


@pytest.mark.criterion(3, "Hadamard alpha and zeta formulas")
def test_c3_randomized_convergence(budget):
    rng = np.random.default_rng(3)
    conclusive, refused = 0, 0
    with budget(10.0):
        for _ in range(10):
            g = gen.random_graph(rng, max_vertices=4, max_edges=5, potential_scale=1.0)
            v = g.vertex_ids[int(rng.integers(g.vertex_ids.__len__()))]
            n = int(rng.integers(1, 4))
            for param in ("alpha", "zeta"):
                a0 = cnd.delta_parameter(g.condition(v))
                at = float(a0) if param == "alpha" else -1.0 / float(a0)
                h = 1e-3 * max(1.0, abs(at))
                try:
                    conv = convergence(
                        lambda **kw: hadamard_alpha_check(g, v, n, parameter=param, at=at, **kw), h
                    )
                except NumericalRefusal:
                    refused += 1
                    continue
                if not conv.conclusive:
                    continue
                conclusive += 1
                assert 3.5 <= conv.ratio <= 4.5, (param, n, conv.ratio)
    assert conclusive >= 15, (conclusive, refused)


# ---------------------------------------------------------------------------
# 4. coupling-change interlacing
# ---------------------------------------------------------------------------


@pytest.mark.criterion(4, "interlacing under coupling change")
def test_c4_interlacing(budget):
    rng = np.random.default_rng(4)
    strict_checked, weak = 0, []
    with budget(180.0):
        for _ in range(100):
            g = gen.random_graph(rng, max_vertices=5, max_edges=6, alpha_range=(-2.0, 2.0), potential_scale=1.0, loops=True)
            v = g.vertex_ids[int(rng.integers(len(g.vertex_ids)))]
            alpha = float(cnd.delta_parameter(g.condition(v)))
            alpha_prime = cnd.INFINITY if rng.random() < 0.2 else alpha + float(rng.uniform(0.05, 4.0))
            r = interlace_check(g, v, alpha, alpha_prime, 15)
            assert r.chains_hold and r.min_slack >= -1e-9, (alpha, alpha_prime, r.min_slack)
            weak += [(v, s.n, s.f_v, s.flux_v, min(s.gaps)) for s in r.strict if min(s.gaps) < 1e-8]
            strict_checked += len(r.strict)
    assert strict_checked > 0
    assert not weak, f"{len(weak)} of {strict_checked} witnessed strict gaps below 1e-8: {weak}"


# ---------------------------------------------------------------------------
# 5. gluing
# ---------------------------------------------------------------------------


def _groups(rng, vids, k):
    """Vertex groups whose identification counts as k gluings."""
    picks = [str(x) for x in rng.permutation(vids)]
    if len(picks) >= 2 * k and rng.random() < 0.5:
        return [picks[2 * i : 2 * i + 2] for i in range(k)]
    return [picks[: k + 1]]


@pytest.mark.criterion(5, "gluing interlacing")
def test_c5_gluing(budget):
    rng = np.random.default_rng(5)
    with budget(120.0):
        for i in range(50):
            k = int(rng.integers(1, 4))
            while True:
                if i % 2:
                    g = gen.disjoint_union(
                        gen.random_graph(rng, max_vertices=3, max_edges=3, potential_scale=1.0),
                        gen.random_graph(rng, max_vertices=3, max_edges=3, potential_scale=1.0),
                    )
                else:
                    g = gen.random_graph(rng, potential_scale=1.0)
                if len(g.vertex_ids) >= k + 1:
                    break
            r = glue_check(g, _groups(rng, g.vertex_ids, k), 10)
            assert r.shift == k
            assert r.chains_hold and r.min_slack >= -1e-9, (i, r.min_slack)


# ---------------------------------------------------------------------------
# 6. spiral
# ---------------------------------------------------------------------------


@pytest.mark.criterion(6, "spectral spiral")
def test_c6_interval_family(budget):
    with budget(60.0):
        tr = spiral_trace(gen.interval(), "b", 64, (-5.0, 60.0))
    assert tr.delta_persistent == () and tr.delta_intersection == ()
    assert not any(p.in_delta for p in tr.points)
    assert tr.monotone and all(tr.monotone.values())
    assert tr.junctions and tr.observed_connected


@pytest.mark.criterion(6, "spectral spiral")
def test_c6_star_family(budget):
    with budget(60.0):
        tr = spiral_trace(gen.star([1.0, 1.0, 1.0]), "c", 64, (-5.0, 60.0))
    assert tr.delta_agree
    assert len(tr.delta_persistent) > 0
    for w in tr.delta_witnesses:
        assert w.f_v <= 1e-8 and w.flux_v <= 1e-8, w


# ---------------------------------------------------------------------------
# 7. nodal count
# ---------------------------------------------------------------------------


@pytest.mark.criterion(7, "nodal count on trees")
def test_c7_nodal(budget):
    rng = np.random.default_rng(7)
    counted = 0
    with budget(120.0):
        for _ in range(30):
            g = gen.random_tree(rng)
            for r in nodal_counts(g, 12):
                if not r.hypotheses_ok:
                    continue
                counted += 1
                assert r.total == r.n - 1, (r.n, r.total)
    assert counted >= 300


# ---------------------------------------------------------------------------
# 8. FEM oracle equivalence
# ---------------------------------------------------------------------------


def _suite(rng):
    for i in range(20):
        if i % 2:
            yield gen.random_tree(rng, potential_scale=2.0)
        else:
            yield gen.random_graph(rng, potential_scale=2.0, loops=True)


@pytest.mark.criterion(8, "FEM oracle equivalence")
def test_c8_oracle(budget):
    rng = np.random.default_rng(8)
    failures = []
    with budget(120.0):
        for i, g in enumerate(_suite(rng)):
            exact = lowest_eigenvalues(g, 10).eigenvalues[:10]
            seq = fem_sequence(g, 1 / 16, 3, 10)
            for s, h in zip(seq, (1 / 16, 1 / 32, 1 / 64)):
                assert s.max_width <= h
            dofs = min(s.eigenvalues.size for s in seq)
            if dofs < 10:
                failures.append((i, f"coarsest mesh has {dofs} eigenvalues"))
            widths = [s.max_width for s in seq]
            for j in range(dofs):
                errs = [s.eigenvalues[j] - exact[j] for s in seq]
                slope = convergence_slope(widths, errs)
                if min(errs) <= 0 or abs(slope - 2.0) > 0.2:
                    failures.append((i, f"lambda_{j + 1} slope {slope:.3f}"))
            worst = float(np.max(_rel(richardson_all(seq)[:dofs], exact[:dofs])))
            if worst > 1e-5:
                failures.append((i, f"richardson relative error {worst:.1e}"))
    assert not failures, failures


# ---------------------------------------------------------------------------
# 9. rescaling
# ---------------------------------------------------------------------------


@pytest.mark.criterion(9, "rescaling equivalence")
def test_c9_rescaling(budget):
    rng = np.random.default_rng(9)
    with budget(120.0):
        for _ in range(20):
            g = gen.random_graph(rng, potential_scale=2.0, loops=True)
            xi = rng.uniform(0.5, 2.0, g.n_edges)
            pair = rescale(g, xi)
            a = lowest_eigenvalues(pair.geometric, 15).eigenvalues[:15]
            b = lowest_eigenvalues(pair.algebraic, 15).eigenvalues[:15]
            assert np.all(_rel(b, a) <= 1e-8), np.max(_rel(b, a))


# ---------------------------------------------------------------------------
# 10. condition-form round trips
# ---------------------------------------------------------------------------


@pytest.mark.criterion(10, "condition-form round trips")
def test_c10_round_trips(budget):
    rng = np.random.default_rng(10)
    with budget(30.0):
        for i in range(100):
            d = int(rng.integers(1, 6))
            if i % 5 == 4:
                alpha = cnd.INFINITY if rng.random() < 0.3 else float(rng.uniform(-3, 3))
                ab = cnd.delta_to_ab(alpha, d)
            else:
                ab = cnd.random_valid_condition(rng, d)
            assert cnd.validate_condition(ab, d).passed
            u = cnd.as_unitary(ab, d)
            back = cnd.unitary_to_ab(u)
            p = cnd.ab_to_projector(back)
            final = cnd.projector_to_ab(p)
            assert cnd.kernel_angle(ab, back, d) <= 1e-10
            assert cnd.kernel_angle(ab, final, d) <= 1e-10
