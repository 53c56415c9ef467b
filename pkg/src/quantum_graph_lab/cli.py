"""``qglab``: command-line access to the solver and the experiments.

Every command writes UTF-8 CSV.  The leading ``#`` lines form the run
manifest (schema version, command, input digest, arguments, tolerances,
seeds, tool version) followed by the command's summary; the first
non-comment line is the column header.  Floats are printed with 17
significant digits.

Exit status: 0 all asserted properties hold, 2 structural or parse error,
3 numerical refusal, 4 property violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from . import conditions as cnd
from . import experiments as ex
from . import oracle
from . import secular
from .conditions import INFINITY
from .errors import NumericalRefusal, QuantumGraphError, StructuralError
from .graphfile import read_graph

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_STRUCTURAL = 2
EXIT_REFUSAL = 3
EXIT_VIOLATION = 4


def fmt(x) -> str:
    if x is None:
        return ""
    if x is INFINITY:
        return "inf"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, complex):
        return f"{format(x.real, '.17g')}{format(x.imag, '+.17g')}j"
    return str(x)


class Report:
    """Collects manifest, summary lines and rows; renders deterministic text."""

    def __init__(self, command: str, args: argparse.Namespace, columns: list[str]):
        self.command = command
        self.args = args
        self.columns = columns
        self.summary: list[tuple[str, object]] = []
        self.rows: list[list[object]] = []
        self.ok = True
        self.refused: NumericalRefusal | None = None

    def note(self, key: str, value) -> None:
        self.summary.append((key, value))

    def row(self, *values) -> None:
        self.rows.append(list(values))

    def _manifest(self) -> list[str]:
        lines = [f"schema_version: {SCHEMA_VERSION}", f"tool: qglab {__version__}", f"command: {self.command}"]
        path = getattr(self.args, "graph", None)
        if path is not None:
            p = Path(path)
            lines.append(f"input: {p.name} sha256={_digest(p)}")
            for side in sorted(getattr(self.args, "_side_files", ())):
                lines.append(f"input_matrix: {side.name} sha256={_digest(side)}")
        skip = {"graph", "func", "output", "_side_files"}
        arg_items = sorted((k, v) for k, v in vars(self.args).items() if k not in skip and not k.startswith("_"))
        lines.append("arguments: " + " ".join(f"{k}={_argfmt(v)}" for k, v in arg_items))
        lines.append("tolerances: " + " ".join(f"{k}={fmt(v)}" for k, v in _tolerances(self.args)))
        lines.append("seeds: " + (fmt(getattr(self.args, "seed", None)) or "none"))
        return lines

    def render(self) -> str:
        buf = io.StringIO()
        for line in self._manifest():
            buf.write(f"# {line}\n")
        for key, value in self.summary:
            buf.write(f"# {key}: {value if isinstance(value, str) else fmt(value)}\n")
        status = "refused" if self.refused is not None else ("pass" if self.ok else "fail")
        buf.write(f"# status: {status}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([fmt(x) for x in r])
        return buf.getvalue()


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _argfmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ";".join(_argfmt(x) for x in v) + "]"
    return fmt(v)


def _tolerances(args) -> list[tuple[str, float]]:
    tol = [
        ("tau_cond", cnd.TAU_COND),
        ("tau_mult", getattr(args, "tau_mult", secular.TAU_MULT)),
        ("tau_eig", secular.TAU_EIG),
        ("accept_sigma", secular.SolverOptions().accept_sigma),
        ("refine_rel", secular.REFINE_REL),
        ("jump_rel", secular.JUMP_REL),
        ("tau_int", ex.TAU_INT),
        ("tau_nodal", ex.TAU_NODAL),
        ("strict_gap", ex.STRICT_GAP),
    ]
    return tol


def _load(args):
    g = read_graph(args.graph)
    base = Path(args.graph).parent
    names = g.__dict__.get("_matrix_names", {})
    args._side_files = tuple(base / n for n in names.values())
    return g


def _alpha(text: str):
    try:
        return cnd.coerce_alpha(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'inf', got {text!r}") from None


def _options(args) -> secular.SolverOptions:
    return secular.SolverOptions(tau_mult=getattr(args, "tau_mult", secular.TAU_MULT), oracle=not getattr(args, "no_oracle", False))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _condition_label(cond) -> str:
    alpha = cnd.delta_parameter(cond)
    if alpha is INFINITY:
        return "dirichlet"
    if isinstance(cond, cnd.Delta):
        return "neumann" if alpha == 0 else f"delta {fmt(alpha)}"
    if isinstance(cond, cnd.ExtendedDeltaAngle):
        return f"gamma {fmt(cond.gamma)}"
    if isinstance(cond, cnd.CirclePoint):
        return f"theta {fmt(cond.theta)}"
    return "general"


def cmd_check(args) -> Report:
    g = _load(args)
    rep = Report("check", args, ["kind", "id", "property", "value"])
    for v in g.vertices:
        d = g.degree(v.id)
        val = cnd.validate_condition(g.flux_condition(v.id), d)
        rep.row("vertex", v.id, "degree", d)
        rep.row("vertex", v.id, "condition", _condition_label(v.condition))
        rep.row("vertex", v.id, "rank", val.rank)
        rep.row("vertex", v.id, "hermiticity_defect", val.hermiticity_defect)
        rep.row("vertex", v.id, "valid", val.passed)
        rep.ok &= val.passed
    for e in g.edges:
        rep.row("edge", e.id, "endpoints", f"{e.u}->{e.w}")
        rep.row("edge", e.id, "length", e.length)
        if not e.potential.is_zero:
            rep.row("edge", e.id, "potential_pieces", len(e.potential.values))
        if e.coefficient != 1.0:
            rep.row("edge", e.id, "coefficient", e.coefficient)
    rep.note("vertices", len(g.vertices))
    rep.note("edges", g.n_edges)
    rep.note("components", len(g.components()))
    rep.note("total_length", g.total_length)
    rep.note("real", g.is_real)
    return rep


def cmd_spectrum(args) -> Report:
    g = _load(args)
    opts = _options(args)
    if args.count is not None:
        spec = secular.lowest_eigenvalues(g, args.count, opts)
    else:
        if args.lambda_max is None:
            raise StructuralError("E_USAGE", "give --lambda-max or --count")
        lo = args.lambda_min if args.lambda_min is not None else secular.ground_state_lower_bound(g)
        spec = secular.find_spectrum(g, (lo, args.lambda_max), opts)
    rep = Report("spectrum", args, ["index", "lambda", "multiplicity"])
    for n, lam, m in spec.indexed():
        for j in range(m):
            rep.row(n + j, lam, m)
    c = spec.certificate
    rep.note("window", f"({fmt(spec.window[0])}, {fmt(spec.window[1])}]")
    if c is not None:
        rep.note("found", c.found)
        rep.note("exact_count", c.exact_count)
        rep.note("weyl_estimate", c.weyl_estimate)
        rep.note("oracle", c.oracle_status)
        rep.note("rescans", c.rescans)
        rep.ok = c.complete and c.oracle_status != "violated"
    return rep


def cmd_eigenfunction(args) -> Report:
    g = _load(args)
    if (args.lam is None) == (args.index is None):
        raise StructuralError("E_USAGE", "give exactly one of --lambda and --index")
    if args.index is not None:
        lam = float(secular.lowest_eigenvalues(g, args.index).eigenvalues[args.index - 1])
    else:
        lam = args.lam
    basis = secular.eigenfunctions(g, lam)
    if not 1 <= args.basis <= len(basis):
        raise NumericalRefusal("E_BASIS", f"eigenspace has dimension {len(basis)}; --basis {args.basis} is out of range", multiplicity=len(basis))
    f = basis[args.basis - 1]
    samples = [(e.id, *f.sample(e.id, args.points)) for e in g.edges]
    is_complex = any(np.any(np.abs(np.imag(y)) > 0) or np.any(np.abs(np.imag(yp)) > 0) for _, _, y, yp in samples)
    cols = ["edge_id", "x", "f", "fprime"] + (["f_imag", "fprime_imag"] if is_complex else [])
    rep = Report("eigenfunction", args, cols)
    for eid, x, y, yp in samples:
        for xi, yi, ypi in zip(x, y, yp):
            extra = [float(np.imag(yi)), float(np.imag(ypi))] if is_complex else []
            rep.row(eid, float(xi), float(np.real(yi)), float(np.real(ypi)), *extra)
    rep.note("lambda", f.lam)
    rep.note("multiplicity", len(basis))
    rep.note("max_vertex_residual", f.max_residual())
    return rep


def cmd_interlace(args) -> Report:
    g = _load(args)
    alpha = args.alpha
    if alpha is None:
        alpha = cnd.delta_parameter(g.condition(args.vertex))
        if alpha is None or alpha is INFINITY:
            raise StructuralError("E_PRECONDITION", "vertex has no finite delta coupling; pass --alpha")
    r = ex.interlace_check(g, args.vertex, float(alpha), args.alpha_prime, args.depth, options=_options(args))
    cols = ["kind", "n", "lambda_alpha", "lambda_alpha_prime", "lambda_dirichlet", "lambda_alpha_next", "slack", "witness", "passed"]
    rep = Report("interlace", args, cols)
    for c in r.chains:
        rep.row("chain", c.n, *c.values, min(c.slacks), "", c.passed)
    chain = {c.n: c for c in r.chains}
    for s in r.strict:
        rep.row("strict", s.n, *chain[s.n].values, min(s.gaps), s.witness, s.passed)
    for n, why in r.skipped_strict:
        rep.row("strict_skipped", n, *chain[n].values, "", why, None)
    rep.note("min_slack", r.min_slack)
    rep.note("chains_hold", r.chains_hold)
    rep.note("strict_checked", len(r.strict))
    rep.note("strict_hold", r.strict_hold)
    rep.ok = r.passed
    return rep


def cmd_glue(args) -> Report:
    g = _load(args)
    groups = [grp.split(",") for grp in args.group]
    r = ex.glue_check(g, groups, args.depth, options=_options(args))
    rep = Report("glue", args, ["n", "lambda_original", "lambda_glued", "lambda_original_shifted", "slack", "passed"])
    for c in r.chains:
        rep.row(c.n, *c.values, min(c.slacks), c.passed)
    rep.note("identifications", r.shift)
    rep.note("min_slack", r.min_slack)
    rep.ok = r.chains_hold
    return rep


def cmd_hadamard(args) -> Report:
    g = _load(args)
    if (args.edge is None) == (args.vertex is None):
        raise StructuralError("E_USAGE", "give exactly one of --edge and --vertex")
    if args.edge is not None:
        check = partial(ex.hadamard_length_check, g, args.edge, args.index)
    else:
        check = partial(ex.hadamard_alpha_check, g, args.vertex, args.index, parameter=args.param, at=args.at)
    cols = [
        "parameter", "where", "index", "at", "lambda", "h_fd", "finite_difference",
        "formula", "mismatch", "relative_mismatch", "index_consistent", "passed",
    ]
    rep = Report("hadamard", args, cols)

    def emit(r):
        ok = r.relative_mismatch <= args.rel_tol
        rep.row(r.parameter, r.where, r.n, r.at, r.lam, r.h_fd, r.finite_difference, r.formula, r.mismatch, r.relative_mismatch, r.index_consistent, ok)
        return ok

    if args.convergence:
        h = args.fd_step
        if h is None:
            h = ex.default_step(check(h_fd=None).at)
        conv = ex.convergence(check, h)
        ok = emit(conv.coarse) & emit(conv.fine)
        rep.note("ratio", conv.ratio)
        rep.note("conclusive", conv.conclusive)
        if conv.conclusive:
            ok &= conv.passed()
        else:
            rep.note("convergence", "mismatch below the rounding floor; ratio not asserted")
    else:
        ok = emit(check(h_fd=args.fd_step))
    rep.ok = ok
    return rep


def cmd_spiral(args) -> Report:
    g = _load(args)
    tr = ex.spiral_trace(g, args.vertex, args.theta_steps, (args.lambda_min, args.lambda_max))
    rep = Report("spiral", args, ["theta", "alpha", "branch_id", "lambda", "in_delta"])
    for p in tr.points:
        rep.row(p.theta, p.alpha, p.branch_id, p.lam, p.in_delta)
    rep.note("delta_persistent", _multiset(tr.delta_persistent))
    rep.note("delta_intersection", _multiset(tr.delta_intersection))
    rep.note("delta_agree", tr.delta_agree)
    wit_ok = all(w.f_v <= ex.TAU_NODAL and w.flux_v <= ex.TAU_NODAL for w in tr.delta_witnesses)
    for w in tr.delta_witnesses:
        rep.note("delta_witness", f"lambda={fmt(w.lam)} f_v={fmt(w.f_v)} flux_v={fmt(w.flux_v)}")
    mono = all(tr.monotone.values())
    rep.note("monotone_in_alpha", mono)
    rep.note("orientation", tr.orientation)
    for j in tr.junctions:
        rep.note(
            "junction",
            f"branch {j.lower} -> {j.upper} at {fmt(j.dirichlet_value)} connected={fmt(j.connected)}",
        )
    rep.note("observed_connected", tr.observed_connected)
    for n in tr.notes:
        rep.note("note", n)
    rep.ok = tr.delta_agree and wit_ok and mono and tr.observed_connected
    return rep


def _multiset(items) -> str:
    return "{" + ", ".join(f"{fmt(v)}x{m}" for v, m in items) + "}"


def cmd_nodal(args) -> Report:
    g = _load(args)
    if args.index is not None:
        reports = [ex.nodal_count(g, args.index, options=_options(args))]
    else:
        reports = ex.nodal_counts(g, args.max_index, options=_options(args))
    rep = Report("nodal", args, ["index", "lambda", "multiplicity", "zeros", "expected", "status", "witness"])
    hyp_fail = 0
    for r in reports:
        status = {True: "pass", False: "fail", None: "hypothesis"}[r.passed]
        rep.row(r.n, r.lam, r.multiplicity, r.total, r.expected, status, "; ".join(r.violations))
        rep.ok &= r.passed is not False
        hyp_fail += r.passed is None
    rep.note("checked", sum(r.passed is not None for r in reports))
    rep.note("hypothesis_failures", hyp_fail)
    if args.index is not None and reports[0].passed is None:
        rep.refused = NumericalRefusal("E_HYPOTHESIS", f"lambda_{args.index}: " + "; ".join(reports[0].violations))
    return rep


def cmd_oracle_compare(args) -> Report:
    g = _load(args)
    exact = secular.lowest_eigenvalues(g, args.count, _options(args)).eigenvalues[: args.count]
    h = args.h if args.h is not None else oracle.default_mesh_width(g)
    seq = oracle.fem_sequence(g, h, args.levels, args.count)
    extrap = oracle.richardson_all(seq)
    rep = Report("oracle-compare", args, ["index", "lambda_exact", "method", "mesh_width", "lambda_approx", "error"])
    widths = [s.max_width for s in seq]
    slopes = []
    upper_ok = True
    for i, lam in enumerate(exact):
        errs = []
        for s in seq:
            approx = s.eigenvalues[i]
            err = approx - lam
            errs.append(err)
            upper_ok &= err >= -args.tol * max(1.0, abs(lam))
            rep.row(i + 1, lam, "fem", s.max_width, approx, err)
        rep.row(i + 1, lam, "richardson", None, extrap[i], extrap[i] - lam)
        if min(abs(e) for e in errs) > 1e-10 * max(1.0, abs(lam)):
            slopes.append(oracle.convergence_slope(widths, np.abs(errs)))
    rich_err = float(np.max(np.abs(extrap[: len(exact)] - exact) / np.maximum(1.0, np.abs(exact))))
    slope_ok = all(abs(s - 2.0) <= args.slope_tol for s in slopes)
    rep.note("slopes", " ".join(fmt(s) for s in slopes) or "none (fem exact)")
    rep.note("slope_ok", slope_ok)
    rep.note("richardson_max_relative_error", rich_err)
    rep.note("fem_upper_bounds", upper_ok)
    rep.ok = slope_ok and upper_ok and rich_err <= args.richardson_tol
    return rep


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qglab", description="Spectra and spectral experiments on quantum graphs.")
    p.add_argument("--version", action="version", version=f"qglab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("graph", help="graph description file")
        sp.add_argument("-o", "--output", help="write CSV here instead of stdout")
        sp.set_defaults(func=func)
        return sp

    def solver_flags(sp):
        sp.add_argument("--tau-mult", type=float, default=secular.TAU_MULT, help="relative singular value gap for multiplicity")
        sp.add_argument("--no-oracle", action="store_true", help="skip the FEM cross-check in the certificate")

    add("check", cmd_check, "parse and validate a graph file")

    sp = add("spectrum", cmd_spectrum, "eigenvalues in a window, with multiplicity")
    sp.add_argument("--lambda-max", type=float)
    sp.add_argument("--lambda-min", type=float, help="window is (min, max]; default below the ground state")
    sp.add_argument("--count", type=int, help="the lowest COUNT eigenvalues instead of a window")
    solver_flags(sp)

    sp = add("eigenfunction", cmd_eigenfunction, "sample an eigenfunction on every edge")
    sp.add_argument("--lambda", dest="lam", type=float, help="eigenvalue")
    sp.add_argument("--index", type=int, help="use lambda_INDEX instead of --lambda")
    sp.add_argument("--basis", type=int, default=1, help="member of the orthonormal eigenspace basis (1-based)")
    sp.add_argument("--points", type=int, default=101, help="samples per edge")

    sp = add("interlace", cmd_interlace, "coupling-change interlacing at a delta vertex")
    sp.add_argument("--vertex", required=True)
    sp.add_argument("--alpha", type=float, help="base coupling (default: the file's)")
    sp.add_argument("--alpha-prime", type=_alpha, required=True, help="larger coupling or 'inf'")
    sp.add_argument("--depth", type=int, default=15)
    solver_flags(sp)

    sp = add("glue", cmd_glue, "interlacing after identifying vertices")
    sp.add_argument("--group", action="append", required=True, help="comma-separated vertices to identify (repeatable)")
    sp.add_argument("--depth", type=int, default=10)
    solver_flags(sp)

    sp = add("hadamard", cmd_hadamard, "finite differences against eigenvalue derivative formulas")
    sp.add_argument("--edge", help="pendant Dirichlet edge whose length varies")
    sp.add_argument("--vertex", help="delta vertex whose coupling varies")
    sp.add_argument("--param", choices=("alpha", "zeta"), default="alpha")
    sp.add_argument("--at", type=float, help="parameter value (default: the file's)")
    sp.add_argument("--index", type=int, required=True)
    sp.add_argument("--fd-step", type=float, help="central-difference step (default 1e-4 max(1, |p|))")
    sp.add_argument("--rel-tol", type=float, default=1e-4)
    sp.add_argument("--convergence", action="store_true", help="also run at half the step and report the ratio")

    sp = add("spiral", cmd_spiral, "spectra along the extended delta circle at a vertex")
    sp.add_argument("--vertex", required=True)
    sp.add_argument("--theta-steps", type=int, default=64)
    sp.add_argument("--lambda-max", type=float, default=60.0)
    sp.add_argument("--lambda-min", type=float, default=-5.0)

    sp = add("nodal", cmd_nodal, "nodal counts on a tree")
    sp.add_argument("--index", type=int, help="a single eigenfunction (refuses if hypotheses fail)")
    sp.add_argument("--max-index", type=int, default=12)
    solver_flags(sp)

    sp = add("oracle-compare", cmd_oracle_compare, "FEM convergence against the secular eigenvalues")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--h", type=float, help="coarsest mesh width (default: from the graph)")
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--tol", type=float, default=1e-9, help="allowed undershoot of the FEM upper bounds")
    sp.add_argument("--slope-tol", type=float, default=0.2)
    sp.add_argument("--richardson-tol", type=float, default=1e-5)
    solver_flags(sp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rep = args.func(args)
    except QuantumGraphError as exc:
        print(f"qglab: error: {exc}", file=sys.stderr)
        return exc.exit_status
    except MemoryError as exc:
        print(f"qglab: error: E_RESOURCE: {exc}", file=sys.stderr)
        return EXIT_REFUSAL
    text = rep.render()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if rep.refused is not None:
        print(f"qglab: error: {rep.refused}", file=sys.stderr)
        return EXIT_REFUSAL
    return EXIT_OK if rep.ok else EXIT_VIOLATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
