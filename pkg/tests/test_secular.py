import math

import numpy as np
import pytest

from quantum_graph_lab import conditions as cnd
from quantum_graph_lab import generators as gen
from quantum_graph_lab.errors import NumericalRefusal
from quantum_graph_lab.graph import Edge, MetricGraph, PiecewisePotential, Vertex, rescale
from quantum_graph_lab.secular import (
    SolverOptions,
    count_at_most,
    eigenfunctions,
    eigenvalue_count,
    find_spectrum,
    ground_state_lower_bound,
    lowest_eigenvalues,
    secular_value,
)

PI2 = math.pi**2

# kappa coth(kappa) = 3, solved to 30 digits independently
ROBIN_GROUND = -8.908461461856395
# star (1, 1.3, 1.7), delta 0.5 center, Dirichlet, Dirichlet, Neumann leaves:
# roots of -k cot k - k cot 1.3k + k tan 1.7k = 0.5, 30-digit reference
GENERIC_STAR = [0.5039448793684215072, 2.6736998517849595126, 6.6867100991028913564,
                8.6339130946169856136, 15.844934212666814882, 22.21471731386836298]


def test_dirichlet_interval_closed_form():
    spec = lowest_eigenvalues(gen.interval(), 20)
    exact = (np.arange(1, 21) * math.pi) ** 2
    assert np.allclose(spec.eigenvalues, exact, rtol=1e-12, atol=0)
    assert spec.certificate.complete


def test_secular_value_vanishes_on_the_spectrum():
    g = gen.interval()
    assert secular_value(g, PI2)[0] < 1e-12
    assert secular_value(g, 5.0)[0] > 1e-3


def test_counting_function_matches_closed_form():
    g = gen.interval()
    for lam in (-1.0, 5.0, PI2 + 1e-6, 50.0, 400.0):
        expected = 0 if lam <= 0 else int(math.floor(math.sqrt(lam) / math.pi))
        assert eigenvalue_count(g, lam) == expected
    # strict below, inclusive at
    assert eigenvalue_count(g, PI2) == 0
    assert count_at_most(g, PI2) == 1


def test_robin_negative_eigenvalue():
    g = gen.interval(1.0, cnd.DIRICHLET, cnd.Delta(-3.0))
    spec = lowest_eigenvalues(g, 1)
    assert spec.eigenvalues[0] == pytest.approx(ROBIN_GROUND, rel=1e-12)
    assert ground_state_lower_bound(g) < ROBIN_GROUND


def test_generic_star_reference():
    g = gen.star([1.0, 1.3, 1.7], center=cnd.Delta(0.5), leaf=cnd.DIRICHLET)
    g = g.with_condition("l3", cnd.NEUMANN)
    spec = lowest_eigenvalues(g, 6)
    assert np.allclose(spec.eigenvalues[:6], GENERIC_STAR, rtol=1e-12)
    assert spec.certificate.oracle_status.startswith("consistent")


def test_equilateral_star_multiplicities():
    spec = find_spectrum(gen.star([1.0, 1.0, 1.0]), (0.0, 45.0))
    assert spec.multiplicities == (1, 2, 1, 2)
    assert np.allclose(spec.values, np.array([0.25, 1.0, 2.25, 4.0]) * PI2, rtol=1e-12)


def test_constant_potential_shifts_the_spectrum():
    V = PiecewisePotential.constant(1.0, 2.0)
    spec = lowest_eigenvalues(gen.interval(potential=V), 5)
    assert np.allclose(spec.eigenvalues, (np.arange(1, 6) * math.pi) ** 2 + 2.0, rtol=1e-12)


def test_neumann_loop_is_a_circle():
    # circle of length 2: 0 simple, (pi n)^2 double
    spec = find_spectrum(gen.loop(2.0), (-1.0, 40.0))
    assert spec.multiplicities == (1, 2, 2)
    assert np.allclose(spec.values, [0.0, PI2, 4 * PI2], atol=1e-12)


def test_half_open_window_and_global_index():
    spec = find_spectrum(gen.interval(), (PI2, 4 * PI2))
    assert np.allclose(spec.values, [4 * PI2])
    assert spec.start_index == 2
    assert spec.indexed() == [(2, pytest.approx(4 * PI2), 1)]


def test_complex_condition_spectrum_is_certified(rng):
    ab = cnd.random_valid_condition(rng, 3, "unitary")
    g = MetricGraph([Vertex("c", ab)] + [Vertex(f"l{i}", cnd.DIRICHLET) for i in range(3)],
                    [Edge(f"e{i}", "c", f"l{i}", 1.0 + 0.2 * i) for i in range(3)])
    spec = find_spectrum(g, (ground_state_lower_bound(g), 60.0), SolverOptions(oracle=False))
    assert spec.certificate.complete
    assert len(spec) == count_at_most(g, 60.0)


def test_eigenfunction_of_the_interval():
    g = gen.interval()
    (f,) = eigenfunctions(g, 4 * PI2)
    x = np.linspace(0, 1, 11)
    vals, _ = f.evaluate("e1", x)
    ref = math.sqrt(2) * np.sin(2 * math.pi * x)
    assert np.allclose(np.abs(vals), np.abs(ref), atol=1e-10)
    assert f.norm() == pytest.approx(1.0, rel=1e-12)
    assert f.max_residual() < 1e-12
    assert f.wronskian_defect("e1", x) < 1e-12


def test_eigenspace_is_orthonormal():
    basis = eigenfunctions(gen.star([1.0, 1.0, 1.0]), PI2)
    assert len(basis) == 2
    for f in basis:
        assert f.norm() == pytest.approx(1.0, rel=1e-10)
        assert abs(f.vertex_value("c")) < 1e-10


def test_not_an_eigenvalue_is_refused():
    with pytest.raises(NumericalRefusal) as exc:
        eigenfunctions(gen.interval(), 5.0)
    assert exc.value.exit_status == 3


def test_rescaled_representations_agree():
    g = gen.star([1.0, 1.3, 1.7], center=cnd.Delta(-0.7))
    pair = rescale(g, [1.4, 0.6, 1.1])
    a = lowest_eigenvalues(pair.geometric, 8).eigenvalues[:8]
    b = lowest_eigenvalues(pair.algebraic, 8).eigenvalues[:8]
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


NEAR_POLE = """
vertex v0 delta 0.6299046664194337
vertex v1 delta -0.5924877917233711
edge e0 v0 v1 1.7740022124524355
edge e1 v0 v1 1.690797035581283
edge e2 v0 v0 1.8312468097471934 V=-0.5996941628950327|0.7633555471582285|-0.8048939096496537
edge e3 v0 v1 1.0552230305782986 V=-0.5890922156768026|0.507356411342172|0.7970378940423324
"""


def test_eigenvalue_next_to_an_edge_pole():
    # lambda_6 sits 1e-8 (relative) from a Dirichlet eigenvalue of the loop e2,
    # and its eigenfunction nearly vanishes at v1, so raising alpha(v1) moves it by ~1e-7
    from quantum_graph_lab.graphfile import parse_graph_text

    g = parse_graph_text(NEAR_POLE)
    alphas = (-0.5924877917233711, 0.0, 0.4538734898900372)
    lam6 = [lowest_eigenvalues(g.with_condition("v1", cnd.Delta(a)), 6).eigenvalues[5] for a in alphas]
    steps = np.diff(lam6)
    assert np.all(steps > 0)
    assert lam6[-1] - lam6[0] == pytest.approx(1.2315e-7, rel=0.02)
