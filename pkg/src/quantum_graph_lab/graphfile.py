"""Line-oriented graph description files.

::

    # comment
    vertex <id> <condspec>
    edge <id> <u> <w> <length> [V=<potential>] [c=<coefficient>]

``condspec`` is one of ``delta <alpha|inf>``, ``gamma <value>``,
``theta <value>``, ``dirichlet``, ``neumann`` or ``general <matrixfile>``.
A matrix file holds the rows of A followed by the rows of B, entries
either ``re`` or ``re,im``; its path is relative to the graph file.

A potential is either a single value (constant) or alternating values and
interior breakpoints, ``V=v0|x1|v1|x2|v2``: ``v0`` on ``[0, x1]``, ``v1`` on
``[x1, x2]`` and so on.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import conditions as cnd
from .conditions import INFINITY, CirclePoint, Delta, ExtendedDeltaAngle, GeneralAB
from .errors import GraphFileError, StructuralError
from .graph import Edge, MetricGraph, PiecewisePotential, Vertex

_TOKEN = re.compile(r"\S+")
_ID = re.compile(r"^[A-Za-z0-9_.:\-]+$")


@dataclass(frozen=True)
class _Tok:
    text: str
    col: int


def _tokens(line: str) -> list[_Tok]:
    body = line.split("#", 1)[0]
    return [_Tok(m.group(0), m.start() + 1) for m in _TOKEN.finditer(body)]


def _float(tok: _Tok, lineno: int, what: str) -> float:
    try:
        x = float(tok.text)
    except ValueError:
        raise GraphFileError("E_SYNTAX", f"{what}: cannot parse {tok.text!r} as a number", line=lineno, column=tok.col) from None
    if not math.isfinite(x):
        raise GraphFileError("E_SYNTAX", f"{what} must be finite", line=lineno, column=tok.col)
    return x


def _complex(text: str) -> complex:
    if "," in text:
        re_, im = text.split(",", 1)
        return complex(float(re_), float(im))
    return complex(float(text))


def read_matrix_file(path: Path) -> GeneralAB:
    """A then B, one row per line; the row count fixes the dimension."""
    rows = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        body = raw.split("#", 1)[0].split()
        if body:
            rows.append([_complex(x) for x in body])
    if not rows or len(rows) % 2:
        raise ValueError("expected 2d rows (A then B)")
    d = len(rows) // 2
    if any(len(r) != d for r in rows):
        raise ValueError(f"every row must have {d} entries")
    M = np.array(rows)
    A, B = M[:d], M[d:]
    if np.all(A.imag == 0) and np.all(B.imag == 0):
        A, B = A.real, B.real
    return GeneralAB(A, B)


def format_matrix(cond: GeneralAB) -> str:
    def fmt(z):
        z = complex(z)
        if z.imag == 0:
            return repr(float(z.real))
        return f"{float(z.real)!r},{float(z.imag)!r}"

    lines = [" ".join(fmt(z) for z in row) for row in np.vstack([cond.A, cond.B])]
    return "\n".join(lines) + "\n"


def _parse_potential(tok: _Tok, length: float, lineno: int) -> PiecewisePotential:
    parts = tok.text[2:].split("|")
    if len(parts) % 2 == 0:
        raise GraphFileError("E_SYNTAX", "potential needs values alternating with breakpoints", line=lineno, column=tok.col)
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise GraphFileError("E_SYNTAX", f"bad potential {tok.text!r}", line=lineno, column=tok.col) from None
    values = nums[0::2]
    cuts = nums[1::2]
    bps = [0.0] + cuts + [length]
    try:
        return PiecewisePotential(tuple(bps), tuple(values))
    except StructuralError as exc:
        raise GraphFileError("E_POTENTIAL", exc.message, line=lineno, column=tok.col) from None


def _parse_cond(toks: list[_Tok], lineno: int, base: Path | None):
    if not toks:
        raise GraphFileError("E_SYNTAX", "missing condition", line=lineno)
    kind = toks[0]
    args = toks[1:]

    def want(n):
        if len(args) != n:
            col = args[n].col if len(args) > n else kind.col
            raise GraphFileError("E_SYNTAX", f"condition {kind.text!r} takes {n} argument(s)", line=lineno, column=col)

    if kind.text == "dirichlet":
        want(0)
        return Delta(INFINITY)
    if kind.text == "neumann":
        want(0)
        return Delta(0.0)
    if kind.text == "delta":
        want(1)
        if args[0].text in ("inf", "+inf", "infinity"):
            return Delta(INFINITY)
        return Delta(_float(args[0], lineno, "alpha"))
    if kind.text == "gamma":
        want(1)
        return ExtendedDeltaAngle(_float(args[0], lineno, "gamma"))
    if kind.text == "theta":
        want(1)
        return CirclePoint(_float(args[0], lineno, "theta"))
    if kind.text == "general":
        want(1)
        path = Path(args[0].text)
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            cond = read_matrix_file(path)
        except (OSError, ValueError) as exc:
            raise GraphFileError("E_MATRIX_FILE", f"{args[0].text}: {exc}", line=lineno, column=args[0].col) from None
        return _GeneralRef(cond, args[0].text)
    raise GraphFileError("E_UNKNOWN_COND", f"unknown condition {kind.text!r}", line=lineno, column=kind.col)


@dataclass(frozen=True, eq=False)
class _GeneralRef:
    cond: GeneralAB
    name: str


def parse_graph_text(text: str, base: Path | None = None) -> MetricGraph:
    vertices: dict[str, tuple[object, int, int]] = {}
    edges: list[tuple[Edge, int, list[_Tok]]] = []
    edge_ids: set[str] = set()
    matrix_names: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        toks = _tokens(line)
        if not toks:
            continue
        rec = toks[0]
        if rec.text == "vertex":
            if len(toks) < 3:
                raise GraphFileError("E_SYNTAX", "expected: vertex <id> <condspec>", line=lineno, column=rec.col)
            vid = toks[1]
            _check_id(vid, lineno)
            if vid.text in vertices:
                raise GraphFileError("E_DUPLICATE_ID", f"vertex {vid.text!r} defined twice", line=lineno, column=vid.col)
            cond = _parse_cond(toks[2:], lineno, base)
            if isinstance(cond, _GeneralRef):
                matrix_names[vid.text] = cond.name
                cond = cond.cond
            vertices[vid.text] = (cond, lineno, vid.col)
        elif rec.text == "edge":
            if len(toks) < 5:
                raise GraphFileError("E_SYNTAX", "expected: edge <id> <u> <w> <length> [V=...] [c=...]", line=lineno, column=rec.col)
            eid, u, w, ltok = toks[1:5]
            _check_id(eid, lineno)
            if eid.text in edge_ids:
                raise GraphFileError("E_DUPLICATE_ID", f"edge {eid.text!r} defined twice", line=lineno, column=eid.col)
            length = _float(ltok, lineno, "length")
            if length <= 0:
                raise GraphFileError("E_NONPOSITIVE_LENGTH", f"edge {eid.text!r} has length {length}", line=lineno, column=ltok.col)
            pot = None
            coef = 1.0
            for opt in toks[5:]:
                if opt.text.startswith("V="):
                    pot = _parse_potential(opt, length, lineno)
                elif opt.text.startswith("c="):
                    coef = _float(_Tok(opt.text[2:], opt.col + 2), lineno, "coefficient")
                    if coef <= 0:
                        raise GraphFileError("E_SYNTAX", "coefficient must be positive", line=lineno, column=opt.col)
                else:
                    raise GraphFileError("E_SYNTAX", f"unknown edge option {opt.text!r}", line=lineno, column=opt.col)
            edge_ids.add(eid.text)
            edges.append((Edge(eid.text, u.text, w.text, length, pot, coef), lineno, toks))
        else:
            raise GraphFileError("E_SYNTAX", f"unknown record {rec.text!r}", line=lineno, column=rec.col)

    degree = {v: 0 for v in vertices}
    for e, lineno, toks in edges:
        for tok in (toks[2], toks[3]):
            if tok.text not in vertices:
                raise GraphFileError("E_DANGLING_ENDPOINT", f"edge {e.id!r} references unknown vertex {tok.text!r}", line=lineno, column=tok.col)
            degree[tok.text] += 1
    for vid, (cond, lineno, col) in vertices.items():
        if degree[vid] == 0:
            raise GraphFileError("E_ISOLATED_VERTEX", f"vertex {vid!r} has no incident edges", line=lineno, column=col)
        dim = getattr(cond, "dimension", None)
        if dim is not None and dim != degree[vid]:
            raise GraphFileError(
                "E_DEGREE_MISMATCH", f"vertex {vid!r}: condition has dimension {dim}, degree is {degree[vid]}", line=lineno, column=col
            )
    g = MetricGraph([Vertex(v, c) for v, (c, _, _) in vertices.items()], [e for e, _, _ in edges], validate=False)
    for vid, (_, lineno, col) in vertices.items():
        # self-adjointness is a property of the flux form on coefficient edges
        report = cnd.validate_condition(g.flux_condition(vid), degree[vid])
        if not report.passed:
            raise GraphFileError("E_INVALID_CONDITION", f"vertex {vid!r}: " + "; ".join(report.messages), line=lineno, column=col)
    g.__dict__["_matrix_names"] = matrix_names
    return g


def _check_id(tok: _Tok, lineno: int) -> None:
    if not _ID.match(tok.text):
        raise GraphFileError("E_SYNTAX", f"invalid identifier {tok.text!r}", line=lineno, column=tok.col)


def read_graph(path) -> MetricGraph:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphFileError("E_IO", f"{path}: {exc.strerror}") from None
    return parse_graph_text(text, path.parent)


def _num(x: float) -> str:
    return repr(float(x))


def _condspec(cond, vid: str, matrices: dict[str, str], stem: str) -> str:
    if isinstance(cond, Delta):
        if cond.alpha is INFINITY:
            return "dirichlet"
        if cond.alpha == 0.0:
            return "neumann"
        return f"delta {_num(cond.alpha)}"
    if isinstance(cond, ExtendedDeltaAngle):
        return f"gamma {_num(cond.gamma)}"
    if isinstance(cond, CirclePoint):
        return f"theta {_num(cond.theta)}"
    ab = cond if isinstance(cond, GeneralAB) else cnd.as_ab(cond, cond.dimension)
    name = f"{stem}.{vid}.mat"
    matrices[name] = format_matrix(ab)
    return f"general {name}"


def serialize_graph(g: MetricGraph, stem: str = "graph") -> tuple[str, dict[str, str]]:
    """Text of the graph file plus side matrix files (name -> contents)."""
    matrices: dict[str, str] = {}
    lines = []
    for v in g.vertices:
        lines.append(f"vertex {v.id} {_condspec(v.condition, v.id, matrices, stem)}")
    for e in g.edges:
        parts = [f"edge {e.id} {e.u} {e.w} {_num(e.length)}"]
        if not e.potential.is_zero:
            bps, vals = e.potential.breakpoints, e.potential.values
            seq = [_num(vals[0])]
            for x, val in zip(bps[1:-1], vals[1:]):
                seq += [_num(x), _num(val)]
            parts.append("V=" + "|".join(seq))
        if e.coefficient != 1.0:
            parts.append(f"c={_num(e.coefficient)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n", matrices


def write_graph(g: MetricGraph, path) -> None:
    path = Path(path)
    text, matrices = serialize_graph(g, path.stem)
    for name, body in matrices.items():
        (path.parent / name).write_text(body, encoding="utf-8")
    path.write_text(text, encoding="utf-8")


def graphs_equal(a: MetricGraph, b: MetricGraph) -> bool:
    """Structural equality of parsed graphs (ids, topology, data, conditions)."""
    if a.vertex_ids != b.vertex_ids or a.edge_ids != b.edge_ids:
        return False
    for ea, eb in zip(a.edges, b.edges):
        if (ea.u, ea.w, ea.length, ea.coefficient) != (eb.u, eb.w, eb.length, eb.coefficient):
            return False
        if tuple(ea.potential.breakpoints) != tuple(eb.potential.breakpoints):
            return False
        if tuple(ea.potential.values) != tuple(eb.potential.values):
            return False
    for va, vb in zip(a.vertices, b.vertices):
        ca, cb = va.condition, vb.condition
        if type(ca) is not type(cb):
            return False
        if isinstance(ca, GeneralAB):
            if not (np.array_equal(ca.A, cb.A) and np.array_equal(ca.B, cb.B)):
                return False
        elif ca != cb:
            return False
    return True
