import math

import numpy as np
import pytest

from quantum_graph_lab import conditions as cnd
from quantum_graph_lab import generators as gen
from quantum_graph_lab.errors import StructuralError, UnsupportedSurgery
from quantum_graph_lab.graph import (
    Edge,
    MetricGraph,
    PiecewisePotential,
    Vertex,
    glue_group,
    glue_vertices,
    rescale,
    set_dirichlet,
    split_vertex,
)


def test_self_loop_has_degree_two():
    g = gen.loop(1.0)
    assert g.degree("a") == 2
    assert [end.slot for end in g.ends("a")] == [0, 1]


def test_structural_errors():
    with pytest.raises(StructuralError) as e:
        Edge("e", "a", "b", 0.0)
    assert e.value.code == "E_NONPOSITIVE_LENGTH"
    with pytest.raises(StructuralError) as e:
        MetricGraph([Vertex("a"), Vertex("a")], [Edge("e", "a", "a", 1.0)])
    assert e.value.code == "E_DUPLICATE_ID"
    with pytest.raises(StructuralError) as e:
        MetricGraph([Vertex("a")], [Edge("e", "a", "b", 1.0)])
    assert e.value.code == "E_DANGLING_ENDPOINT"
    with pytest.raises(StructuralError) as e:
        MetricGraph([Vertex("a"), Vertex("b"), Vertex("c")], [Edge("e", "a", "b", 1.0)])
    assert e.value.code == "E_ISOLATED_VERTEX"
    with pytest.raises(StructuralError) as e:
        MetricGraph([Vertex("a", cnd.delta_to_ab(0, 2)), Vertex("b")], [Edge("e", "a", "b", 1.0)])
    assert e.value.code == "E_DEGREE_MISMATCH"


def test_potential_pieces_and_evaluation():
    V = PiecewisePotential((0.0, 0.4, 1.0), (2.0, -1.0))
    assert V.pieces() == [(0.0, 0.4, 2.0), (0.4, 1.0, -1.0)]
    assert np.allclose(V(np.array([0.1, 0.5, 1.0])), [2.0, -1.0, -1.0])
    with pytest.raises(StructuralError):
        PiecewisePotential((0.0, 0.5, 0.5), (1.0, 2.0))
    assert V.reversed().values == (-1.0, 2.0)


def test_tree_and_components():
    s = gen.star([1.0, 1.3, 1.7])
    assert s.is_tree()
    assert s.internal_vertices() == ["c"]
    assert s.leaves() == ["l1", "l2", "l3"]
    assert not gen.loop().is_tree()
    u = gen.disjoint_union(gen.interval(), gen.interval())
    assert len(u.components()) == 2
    assert math.isclose(s.total_length, 4.0)


def test_glue_adds_couplings():
    g = gen.disjoint_union(gen.interval(1.0, cnd.Delta(1.0), cnd.DIRICHLET), gen.interval(2.0, cnd.Delta(2.0), cnd.DIRICHLET))
    glued = glue_vertices(g, "g0.a", "g1.a", new_id="m")
    assert glued.degree("m") == 2
    assert cnd.delta_parameter(glued.condition("m")) == pytest.approx(3.0)
    with pytest.raises(UnsupportedSurgery):
        glue_vertices(g, "g0.b", "g1.b")
    tri = glue_group(gen.star([1, 1, 1], leaf=cnd.NEUMANN), ["l1", "l2", "l3"])
    assert tri.n_edges == 3 and len(tri.vertices) == 2


def test_set_dirichlet_and_split():
    s = gen.star([1.0, 1.0, 1.0])
    d = set_dirichlet(s, "c")
    assert cnd.delta_parameter(d.condition("c")) is cnd.INFINITY
    sp = split_vertex(s, "c")
    assert len(sp.vertices) == 6
    assert all(sp.degree(v.id) == 1 for v in sp.vertices)


def test_edge_length_change_at_tip_keeps_potential_near_base():
    V = PiecewisePotential((0.0, 0.5, 1.0), (3.0, 1.0))
    g = gen.interval(1.0, potential=V)
    longer = g.with_edge_length("e1", 1.2, at="b")
    assert longer.edge("e1").potential.breakpoints == (0.0, 0.5, 1.2)
    shorter_at_a = g.with_edge_length("e1", 0.8, at="a")
    assert shorter_at_a.edge("e1").potential.breakpoints == pytest.approx((0.0, 0.3, 0.8))


def test_rescale_pair_shapes():
    g = gen.star([1.0, 1.3, 1.7], center=cnd.Delta(0.5))
    pair = rescale(g, {"e1": 2.0, "e3": 0.5})
    assert [e.length for e in pair.geometric.edges] == [2.0, 1.3, 0.85]
    assert [e.coefficient for e in pair.algebraic.edges] == [0.25, 1.0, 4.0]
    assert [e.length for e in pair.algebraic.edges] == [1.0, 1.3, 1.7]
    with pytest.raises(StructuralError):
        rescale(g, [1.0, -1.0, 1.0])


def test_effective_length():
    e = Edge("e", "a", "b", 2.0, coefficient=4.0)
    assert e.effective_length == 1.0
