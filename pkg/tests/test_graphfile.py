import numpy as np
import pytest

from quantum_graph_lab import conditions as cnd
from quantum_graph_lab import generators as gen
from quantum_graph_lab.errors import GraphFileError
from quantum_graph_lab.graph import Edge, MetricGraph, PiecewisePotential, Vertex, rescale
from quantum_graph_lab.graphfile import graphs_equal, parse_graph_text, read_graph, serialize_graph, write_graph


def test_unit_dirichlet_interval():
    g = parse_graph_text("vertex a dirichlet\nvertex b dirichlet\nedge e1 a b 1.0\n")
    assert g.vertex_ids == ["a", "b"] and g.edge("e1").length == 1.0
    assert cnd.delta_parameter(g.condition("a")) is cnd.INFINITY


def test_comments_and_kirchhoff_star():
    text = """
    # a star
    vertex c delta 0   # Kirchhoff
    vertex l1 dirichlet
    vertex l2 dirichlet
    vertex l3 dirichlet
    edge e1 c l1 1.0
    edge e2 c l2 1.0
    edge e3 c l3 1.0
    """
    g = parse_graph_text(text)
    assert g.degree("c") == 3
    assert cnd.delta_parameter(g.condition("c")) == 0.0


def test_self_loop_degree():
    g = parse_graph_text("vertex a neumann\nedge e1 a a 1.0\n")
    assert g.degree("a") == 2


def test_potential_and_coefficient_options():
    g = parse_graph_text("vertex a dirichlet\nvertex b dirichlet\nedge e1 a b 2 V=1|0.5|-3 c=2\n")
    e = g.edge("e1")
    assert e.potential.breakpoints == (0.0, 0.5, 2.0)
    assert e.potential.values == (1.0, -3.0)
    assert e.coefficient == 2.0


@pytest.mark.parametrize(
    "text, code, line, column",
    [
        ("vertex a robin 1\n", "E_UNKNOWN_COND", 1, 10),
        ("vertex a dirichlet\nvertex a neumann\n", "E_DUPLICATE_ID", 2, 8),
        ("vertex a dirichlet\nedge e1 a b 1\n", "E_DANGLING_ENDPOINT", 2, 11),
        ("vertex a dirichlet\nvertex b dirichlet\nedge e1 a b -2\n", "E_NONPOSITIVE_LENGTH", 3, 13),
        ("vertex a dirichlet\nvertex b dirichlet\nedge e1 a b 1\nedge e1 a b 1\n", "E_DUPLICATE_ID", 4, 6),
        ("vertex a delta x\n", "E_SYNTAX", 1, 16),
        ("node a\n", "E_SYNTAX", 1, 1),
        ("vertex a dirichlet\nvertex b dirichlet\nedge e1 a b 1 W=3\n", "E_SYNTAX", 3, 15),
        ("vertex a dirichlet\nvertex b dirichlet\nedge e1 a b 1 V=1|2|3\n", "E_POTENTIAL", 3, 15),
        ("vertex a general nowhere.mat\n", "E_MATRIX_FILE", 1, 18),
    ],
)
def test_diagnostics(text, code, line, column):
    with pytest.raises(GraphFileError) as exc:
        parse_graph_text(text)
    assert (exc.value.code, exc.value.line, exc.value.column) == (code, line, column)
    assert exc.value.exit_status == 2


def test_invalid_example_files(graphs_dir):
    files = sorted((graphs_dir / "invalid").glob("*.g"))
    assert len(files) >= 10
    for path in files:
        expected = path.stem.split("_shape")[0]
        with pytest.raises(GraphFileError) as exc:
            read_graph(path)
        assert exc.value.code == expected, path.name
        assert exc.value.line is not None


def test_example_files_parse(graphs_dir):
    for path in sorted(graphs_dir.glob("*.g")):
        assert read_graph(path).n_edges >= 1


def test_round_trip_random_graphs(rng):
    for _ in range(25):
        g = gen.random_graph(rng, potential_scale=4.0, loops=True)
        text, side = serialize_graph(g)
        assert side == {}
        h = parse_graph_text(text)
        assert graphs_equal(g, h)
        assert serialize_graph(h)[0] == text


def test_round_trip_with_matrix_files(tmp_path, rng):
    ab = cnd.random_valid_condition(rng, 3, "unitary")
    g = MetricGraph(
        [Vertex("c", ab), Vertex("x", cnd.CirclePoint(1.0)), Vertex("y", cnd.ExtendedDeltaAngle(0.3)), Vertex("z", cnd.DIRICHLET)],
        [Edge("e1", "c", "x", 1.0), Edge("e2", "c", "y", 1.3, PiecewisePotential((0, 0.5, 1.3), (2, -1))), Edge("e3", "c", "z", 0.7)],
    )
    write_graph(g, tmp_path / "g.g")
    h = read_graph(tmp_path / "g.g")
    assert graphs_equal(g, h)
    write_graph(h, tmp_path / "h.g")
    assert graphs_equal(h, read_graph(tmp_path / "h.g"))
    assert np.iscomplexobj(h.condition("c").A)


def test_rescaled_pair_round_trips(tmp_path):
    g = gen.star([1.0, 1.3, 1.7], center=cnd.Delta(0.5))
    alg = rescale(g, [1.5, 0.8, 1.2]).algebraic
    write_graph(alg, tmp_path / "r.g")
    assert graphs_equal(alg, read_graph(tmp_path / "r.g"))
