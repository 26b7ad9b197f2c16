"""Command-line front end.

Verbs: validate, check, decompose, dsep, solve, query, bench.
Exit codes: 0 success, 1 detected inconsistency or non-convergence,
2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys

from . import consistency, dist, engine, graphops, mce, model


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_model(path: str) -> model.Model:
    return model.parse_model(_read(path))


def _literals(spec: str) -> list[model.Literal]:
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if part.startswith("~"):
            out.append(model.Literal(part[1:], False))
        else:
            out.append(model.Literal(part, True))
    return out


def _names(spec: str | None) -> list[str]:
    if not spec:
        return []
    return [p.strip() for p in spec.split(",") if p.strip()]


def _anneal_opts(args) -> graphops.AnnealOptions:
    return graphops.AnnealOptions(seed=args.seed)


def _solver_opts(args) -> mce.SolverOptions:
    return mce.SolverOptions(
        tolerance=args.tol,
        max_iterations=args.max_iterations,
        max_cycles=args.max_cycles,
        schedule=args.schedule)


def _print_table(table: dist.JointTable, fmt: str, label: str = "") -> None:
    if fmt == "tsv":
        scope = " ".join(table.scope)
        for s in range(table.size):
            bits = f"{s:0{len(table.scope)}b}"
            print(f"{scope}\t{bits}\t{table.probs[s]:.6f}")
    else:
        if label:
            print(label)
        print(dist.serialize_table(table), end="")


def _cmd_validate(args) -> int:
    m = _load_model(args.model)
    for w in model.validate_scope_rule(m):
        print(f"warning: {w}")
    print(f"ok: {len(m.variables)} variables, {len(m.constraints)} constraints")
    return 0


def _cmd_check(args) -> int:
    m = _load_model(args.model)
    if args.local:
        d = graphops.decompose(m, method=args.method, opts=_anneal_opts(args))
        report = consistency.local_check(m, d)
    else:
        report = consistency.global_consistent(m)
    print(consistency.format_report(report, m, show_witnesses=args.witness), end="")
    return 0 if report.consistent else 1


def _cmd_decompose(args) -> int:
    if args.graph:
        g = graphops.parse_graph_text(_read(args.model)).as_neighbor_graph()
        if args.method == "anneal":
            d = graphops.fill_in_anneal(g, _anneal_opts(args))
        else:
            d = graphops.fill_in_greedy(g)
    else:
        m = _load_model(args.model)
        d = graphops.decompose(m, method=args.method, opts=_anneal_opts(args))
    print(graphops.format_decomposition(d), end="")
    return 0


def _cmd_dsep(args) -> int:
    m = _load_model(args.model)
    net = model.build_network(m)
    sep = graphops.d_separated(net, args.x, args.y, _names(args.given))
    print("separated" if sep else "not separated")
    return 0


def _cmd_solve(args) -> int:
    m = _load_model(args.model)
    opts = _solver_opts(args)
    if args.method == "dual":
        table = mce.mce_dual_solve(dist.uniform(m.names), m.constraints, opts)
        _print_table(table, args.format)
        print("converged: yes")
        return 0
    if args.method == "successive":
        table, trace = mce.successive_solve(dist.uniform(m.names), m.constraints, opts)
        _print_table(table, args.format)
        print(f"converged: {'yes' if trace.converged else 'no'} "
              f"({trace.cycles} cycles, {len(trace.events)} updates)")
        if args.trace:
            print(trace.to_tsv(), end="")
        return 0 if trace.converged else 1
    d = graphops.decompose(m, method=args.fill, opts=_anneal_opts(args))
    report = engine.solve_decomposed(m, d, opts)
    for state in report.cliques:
        _print_table(state.table, args.format, label="clique " + ",".join(state.scope))
    if report.error:
        print(f"error: {report.error}")
        return 1
    print(f"converged: {'yes' if report.converged else 'no'} "
          f"({report.cycles} cycles, max residual "
          f"{max(report.final_residuals, default=0.0):.3g})")
    if args.trace:
        print(report.trace.to_tsv(), end="")
    return 0 if report.converged else 1


def _cmd_query(args) -> int:
    m = _load_model(args.model)
    d = graphops.decompose(m, method=args.fill, opts=_anneal_opts(args))
    report = engine.solve_decomposed(m, d, _solver_opts(args))
    if not report.converged:
        print("error: solve did not converge", file=sys.stderr)
        return 1
    event = _literals(args.event)
    given = _literals(args.given) if args.given else []
    p = engine.query(report, event, given)
    ev = ",".join(str(l) for l in event)
    if given:
        gv = ",".join(str(l) for l in given)
        print(f"P({ev}|{gv}) = {p:.6f}")
    else:
        print(f"P({ev}) = {p:.6f}")
    return 0


def _cmd_bench(args) -> int:
    m = _load_model(args.model)
    d = graphops.decompose(m, method="greedy")
    report, _, _ = engine.bench(m, d, mce.SolverOptions(tolerance=args.tol or 1e-4))
    print(engine.format_bench(report), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxentbn",
        description="Max-entropy distributions for constraint networks with "
                    "directed cycles: solving, decomposition, consistency "
                    "checking, and separation queries.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_solver_flags(p, default_tol=None):
        p.add_argument("--tol", type=float, default=default_tol)
        p.add_argument("--max-iterations", type=int, default=500, dest="max_iterations")
        p.add_argument("--max-cycles", type=int, default=100, dest="max_cycles")
        p.add_argument("--schedule", choices=[mce.SCHEDULE_GRADIENT, mce.SCHEDULE_ROUND_ROBIN],
                       default=mce.SCHEDULE_GRADIENT)

    p = sub.add_parser("validate", help="parse a model and report scope-rule warnings")
    p.add_argument("model")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("check", help="constraint-consistency check")
    p.add_argument("model")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--global", dest="local", action="store_false", default=False,
                      help="full state-space check (default)")
    mode.add_argument("--local", dest="local", action="store_true",
                      help="clique-local check over a decomposition")
    p.add_argument("--method", choices=["greedy", "anneal"], default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--witness", action="store_true", help="print witness tables")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("decompose", help="fill-in, cliques, and RIP order")
    p.add_argument("model")
    p.add_argument("--method", choices=["greedy", "anneal"], default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--graph", action="store_true",
                   help="input is a graph file (nodes/edge lines), not a model")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("dsep", help="generalized d-separation query")
    p.add_argument("model")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--given", default="")
    p.set_defaults(func=_cmd_dsep)

    p = sub.add_parser("solve", help="compute the max-entropy distribution")
    p.add_argument("model")
    p.add_argument("--method", choices=["dual", "successive", "decomposed"],
                   default="decomposed")
    p.add_argument("--fill", choices=["greedy", "anneal"], default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--format", choices=["text", "tsv"], default="text")
    add_solver_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("query", help="probability query against the solved model")
    p.add_argument("model")
    p.add_argument("--event", required=True, help="comma-separated literals, e.g. A,~B")
    p.add_argument("--given", default="")
    p.add_argument("--fill", choices=["greedy", "anneal"], default="greedy")
    p.add_argument("--seed", type=int, default=0)
    add_solver_flags(p)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("bench", help="time the dual solve against decomposed updating")
    p.add_argument("model")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_bench)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except model.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except mce.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
