"""Command-line interface: ``laakso-lab <subcommand> ...``.

Exit status is 0 on success, 2 for usage or input errors and 1 when a
numerical routine or a verification suite fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ._rational import format_rational, parse_rational
from .construction import params_from_dimension, params_from_ratio
from .errors import LaaksoError, NumericError, UsageError
from .graph import GraphPoint, QuantumGraph, build_graph

log = logging.getLogger("laakso_lab")


class CliUsageError(Exception):
    """Bad flags or unreadable inputs (exit status 2)."""


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return v


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not a rational number") from exc


def _sheet(text: str) -> str:
    text = "" if text == "-" else text
    if set(text) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"{text!r} is not a binary address (use '-' for the empty one)")
    return text


# -- shared option groups -------------------------------------------------------


def _add_space(p: argparse.ArgumentParser, graph_input: bool = True) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--Q", type=float, help="target dimension in (1, 2]")
    g.add_argument("--t", type=_rational, help="contraction ratio, e.g. 1/2 or 0.45")
    if graph_input:
        g.add_argument("--graph", help="graph JSON written by 'build'")
    p.add_argument("--level", type=_nonneg_int, default=None, help="level n of F_n (default 1)")
    p.add_argument("--depth", type=_positive_int, default=None, help="number of materialized levels")


def _add_output(p: argparse.ArgumentParser, formats: Sequence[str]) -> None:
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=formats, default=formats[0])


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default $LAAKSO_LAB_THREADS or 1); results do not depend on it")


def _params(args):
    level = 1 if args.level is None else args.level
    depth = args.depth or max(6, level)
    if args.Q is not None:
        return params_from_dimension(args.Q, depth)
    t = args.t if args.t is not None else Fraction(1, 2)
    return params_from_ratio(t, depth)


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise CliUsageError(f"no such file: {path}") from None
    except OSError as exc:
        raise CliUsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliUsageError(f"malformed JSON in {path}: {exc.msg} at line {exc.lineno}, column {exc.colno}") from None


def _graph(args) -> QuantumGraph:
    if getattr(args, "graph", None):
        if args.level is not None:
            raise CliUsageError("--level cannot be combined with --graph")
        try:
            return QuantumGraph.from_json(_read_json(args.graph))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliUsageError(f"{args.graph} is not a graph file: {exc}") from None
    return build_graph(_params(args), 1 if args.level is None else args.level)


def _write(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _num(v):
    return format_rational(v) if isinstance(v, (Fraction, int)) else repr(float(v))


def _discretize(graph: QuantumGraph, grid: int):
    from .operators import discretize

    return discretize(graph, g=grid)


# -- subcommands ----------------------------------------------------------------------


def cmd_build(args) -> int:
    graph = build_graph(_params(args), 1 if args.level is None else args.level)
    _write(args, graph.dumps())
    return 0


def cmd_spectrum(args) -> int:
    from .operators import eigensolve

    graph = _graph(args)
    op = _discretize(graph, args.grid)
    spec = eigensolve(op, min(args.eigs, op.n_nodes))
    if args.format == "csv":
        _write(args, spec.to_csv())
    else:
        _write(args, _dump({"level": graph.level, "h": format_rational(op.h), "method": spec.method,
                            "eigenvalues": [float(v) for v in spec.eigenvalues],
                            "residuals": [float(v) for v in spec.residuals]}))
    return 0


def cmd_simulate(args) -> int:
    from .stochastic import estimate_expectation, paths_to_csv, simulate_paths

    graph = _graph(args)
    op = _discretize(graph, args.grid)
    start = op.node_of(args.start[0], _sheet_for(graph, args.start[1]))
    paths = simulate_paths(op, start, args.T, args.N, args.seed, threads=args.threads)
    if args.format == "csv":
        _write(args, paths_to_csv(paths))
    else:
        x = np.asarray(op.node_x, dtype=float)
        times = [args.T * k / 4 for k in range(1, 5)]
        rows = []
        for t in times:
            mean, se = estimate_expectation(paths, x, t)
            rows.append({"t": t, "mean_x": mean, "se": se})
        _write(args, _dump({"seed": args.seed, "N": args.N, "T": args.T, "start": start,
                            "h": format_rational(op.h), "jumps": int(sum(len(p.nodes) - 1 for p in paths)),
                            "coordinate_expectation": rows}))
    if args.summary:
        x = np.asarray(op.node_x, dtype=float)
        mean, se = estimate_expectation(paths, x, args.T)
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(_dump({"seed": args.seed, "N": args.N, "T": args.T, "start": start,
                            "mean_x_at_T": mean, "se": se}))
    return 0


def _sheet_for(graph: QuantumGraph, sheet: str) -> str:
    if len(sheet) != graph.level:
        raise CliUsageError(f"address {sheet or '-'} does not have length {graph.level}")
    return sheet


def _point(graph: QuantumGraph, spec) -> GraphPoint:
    x, sheet = spec
    if not 0 <= x <= 1:
        raise CliUsageError(f"x = {x} outside [0, 1]")
    return graph.point(x, _sheet_for(graph, sheet))


def cmd_distance(args) -> int:
    from .metric import ball, ball_measure, geodesic_distance, geodesic_path

    graph = _graph(args)
    p = _point(graph, args.p)
    out = {"level": graph.level, "p": [format_rational(args.p[0]), args.p[1]]}
    if args.q is not None:
        q = _point(graph, args.q)
        out["q"] = [format_rational(args.q[0]), args.q[1]]
        out["distance"] = _num(geodesic_distance(graph, p, q))
        out["path"] = [[e, _num(a), _num(b)] for e, a, b in geodesic_path(graph, p, q)]
    if args.radius is not None:
        b = ball(graph, p, args.radius)
        out["ball"] = b.to_json()
        out["ball_measure"] = _num(ball_measure(b))
    if "distance" not in out and "ball" not in out:
        raise CliUsageError("give --q and/or --radius")
    _write(args, _dump(out))
    return 0


def cmd_energy(args) -> int:
    from .funcspace import PiecewiseFunction, dirichlet_energy, random_function
    from .operators import operator_form

    graph = _graph(args)
    if args.function:
        f = PiecewiseFunction.from_json(_read_json(args.function), graph)
    else:
        f = random_function(graph, np.random.default_rng(args.seed))
    out = {"level": graph.level, "energy": _num(dirichlet_energy(f))}
    if args.grid is not None:
        op = _discretize(graph, args.grid)
        u = op.sample(f)
        out["h"] = format_rational(op.h)
        out["discrete_energy"] = repr(operator_form(op, u, u))
    _write(args, _dump(out))
    return 0


def cmd_ahlfors(args) -> int:
    from .metric import ahlfors_exponent

    graph = _graph(args)
    fit = ahlfors_exponent(graph, args.samples, (args.rmin, args.rmax), args.seed)
    log.info("fitted exponent %.6f (rms residual %.3e)", fit.exponent, fit.residual)
    if args.format == "csv":
        _write(args, fit.to_csv())
    else:
        _write(args, _dump({"level": graph.level, "exponent": fit.exponent, "residual": fit.residual,
                            "intercept": fit.intercept, "samples": args.samples, "seed": args.seed}))
    return 0


def cmd_poincare(args) -> int:
    from .metric import standard_poincare_suite

    params = _params(args)
    levels = args.levels or [1 if args.level is None else args.level]
    rows = []
    for n in levels:
        rep = standard_poincare_suite(params, n, args.functions, args.balls, args.seed, args.expansion)
        rows.append({"level": n, "constant": rep.constant, "pairs": rep.pairs, "skipped": rep.skipped,
                     "violations": rep.violations})
    _write(args, _dump({"seed": args.seed, "expansion": args.expansion, "levels": rows}))
    return 1 if any(r["violations"] for r in rows) else 0


def cmd_verify(args) -> int:
    from .verify import run_suite

    config = _read_json(args.config) if args.config else {}
    if not isinstance(config, dict):
        raise CliUsageError(f"{args.config} must hold a JSON object")
    if args.seed is not None:
        config["seed"] = args.seed
    report = run_suite(args.suite, config)
    _write(args, report.dumps() if args.format == "json" else report.render_text())
    if not report.ok:
        log.error("suite %s failed", args.suite)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laakso-lab", description="Finite-level Laakso space toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write the level-n graph as JSON")
    _add_space(p, graph_input=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("spectrum", help="lowest eigenvalues of the discretized Laplacian")
    _add_space(p)
    p.add_argument("--eigs", type=_positive_int, default=10)
    p.add_argument("--grid", type=_nonneg_int, default=6, help="h = min edge length / 2^grid")
    _add_output(p, ("csv", "json"))
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("simulate", help="Monte Carlo paths of the diffusion")
    _add_space(p)
    p.add_argument("--grid", type=_nonneg_int, default=3)
    p.add_argument("--start", nargs=2, metavar=("X", "SHEET"), type=str, default=["1/2", None])
    p.add_argument("--T", type=_positive_float, default=0.1)
    p.add_argument("--N", type=_positive_int, default=100)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--summary", help="also write a JSON summary here")
    _add_threads(p)
    _add_output(p, ("csv", "json"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distance", help="geodesic distance, path and ball queries")
    _add_space(p)
    p.add_argument("--p", nargs=2, metavar=("X", "SHEET"), required=True)
    p.add_argument("--q", nargs=2, metavar=("X", "SHEET"))
    p.add_argument("--radius", type=_rational)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("energy", help="Dirichlet energy of a function on F_n")
    _add_space(p)
    p.add_argument("--function", help="function JSON (default: a random member of G_n)")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--grid", type=_nonneg_int, help="also report the discrete form at this grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("ahlfors", help="fit the ball-measure growth exponent")
    _add_space(p)
    p.add_argument("--samples", type=_positive_int, default=200)
    p.add_argument("--rmin", type=_positive_float, default=1 / 16)
    p.add_argument("--rmax", type=_positive_float, default=1 / 4)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    _add_output(p, ("json", "csv"))
    p.set_defaults(func=cmd_ahlfors)

    p = sub.add_parser("poincare", help="empirical Poincare constants over a standard suite")
    _add_space(p, graph_input=False)
    p.add_argument("--levels", type=_nonneg_int, nargs="+")
    p.add_argument("--functions", type=_positive_int, default=50)
    p.add_argument("--balls", type=_positive_int, default=30)
    p.add_argument("--expansion", type=_positive_float, default=1.0)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_poincare)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--suite", default="all")
    p.add_argument("--config", help="JSON object overriding suite defaults")
    p.add_argument("--seed", type=_nonneg_int)
    _add_output(p, ("json", "text"))
    p.set_defaults(func=cmd_verify)
    return parser


def _resolve_points(args) -> None:
    for name in ("p", "q", "start"):
        spec = getattr(args, name, None)
        if spec is None:
            continue
        try:
            x = parse_rational(spec[0])
        except (ValueError, ZeroDivisionError):
            raise CliUsageError(f"--{name}: {spec[0]!r} is not a rational number") from None
        sheet = spec[1]
        if sheet is None:
            lvl = args.level if args.level is not None else (None if getattr(args, "graph", None) else 1)
            sheet = "0" * lvl if lvl is not None else None
        else:
            try:
                sheet = _sheet(sheet)
            except argparse.ArgumentTypeError as exc:
                raise CliUsageError(f"--{name}: {exc}") from None
        setattr(args, name, [x, sheet])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    log.propagate = False
    try:
        return _run(args)
    finally:
        log.removeHandler(handler)


def _run(args) -> int:
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        from .stochastic import default_threads

        args.threads = default_threads()
    resolved = {k: (format_rational(v) if isinstance(v, Fraction) else v)
                for k, v in vars(args).items() if k != "func"}
    try:
        _resolve_points(args)
        if getattr(args, "start", None) is not None and args.start[1] is None:
            g = _graph(args)
            args.start[1] = "0" * g.level
        log.info("resolved config: %s", json.dumps(resolved, sort_keys=True, default=str))
        return args.func(args)
    except CliUsageError as exc:
        log.error("%s", exc)
        return 2
    except NumericError as exc:
        log.error("numerical failure: %s", exc)
        return 1
    except (UsageError, LaaksoError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
