"""Batch experiment runner.

Subcommands expose each subsystem: ``group`` for recursion tables
(info, order, nucleus, activity, assumption-c), ``coloring`` for closed
boundary sets, ``cosofic-sim`` for the approximation experiments and
``bratteli`` for diagram computations.  Data goes to standard output or
the file given by --out (CSV for numeric series, JSON for structured
objects); progress and logs go to standard error.  Reports written to a
file get a companion PNG figure unless --no-figures is passed.

Exit status: 0 success, 2 configuration error, 3 cap exceeded,
4 internal invariant violation (including failed self-tests).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import bratteli as br
from . import coloring as cl
from . import cosofic, permgrp, reporting, selfsim, treecore

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_INVARIANT = 4


class ConfigError(ValueError):
    pass


def log(message: str):
    print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# Argument helpers


def load_table(args) -> selfsim.RecursionTable:
    name = args.table
    if name.endswith(".json"):
        with open(name) as fh:
            return selfsim.RecursionTable.from_json_obj(json.load(fh))
    if name == "gupta_sidki":
        return selfsim.builtin(name, p=args.p)
    if name == "grigorchuk_omega":
        if not args.omega:
            raise ConfigError("grigorchuk_omega needs --omega")
        return selfsim.builtin(name, omega=_parse_omega(args.omega))
    return selfsim.builtin(name)


def _parse_omega(text: str) -> selfsim.OmegaSequence:
    """Parse "012" (pure period) or "pre:period" digit strings."""
    if ":" in text:
        pre, per = text.split(":", 1)
    else:
        pre, per = "", text
    return selfsim.OmegaSequence(
        tuple(int(c) for c in pre), tuple(int(c) for c in per)
    )


def load_closed_set(text: str, valency) -> cl.ClosedSetSpec:
    if text == "empty":
        return cl.ClosedSetSpec.make(valency, [], [])
    if text == "full":
        return cl.ClosedSetSpec.make(valency, [()], [])
    if text.endswith(".json"):
        with open(text) as fh:
            return cl.ClosedSetSpec.from_json_obj(json.load(fh), valency)
    return cl.ClosedSetSpec.from_json_obj(json.loads(text), valency)


def load_diagram(text: str) -> br.BratteliDiagram:
    if text.startswith("odometer"):
        d = int(text[len("odometer"):] or 2)
        return br.odometer(d, horizon=8)
    if text.endswith(".json"):
        with open(text) as fh:
            return br.BratteliDiagram.from_json_obj(json.load(fh))
    return br.BratteliDiagram.from_json_obj(json.loads(text))


def load_clopen(text: str, diagram: br.BratteliDiagram) -> br.ClopenSet:
    if text == "full":
        return br.ClopenSet.full(diagram)
    if text == "empty":
        return br.ClopenSet.empty(diagram)
    if text.endswith(".json"):
        with open(text) as fh:
            return br.ClopenSet.from_json_obj(json.load(fh), diagram)
    return br.ClopenSet.from_json_obj(json.loads(text), diagram)


def emit_json(obj, out: str | None):
    text = json.dumps(obj, indent=2, default=str) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# group subcommands


def cmd_group_info(args) -> int:
    table = load_table(args)
    info = {
        "name": table.name,
        "table": table.to_json_obj(),
    }
    if table.self_similar and table.generators:
        nuc = selfsim.nucleus(table)
        info["nucleus"] = sorted(nuc.state_names())
        info["nucleus_size"] = len(nuc)
    emit_json(info, args.out)
    return EXIT_OK


def cmd_group_order(args) -> int:
    table = load_table(args)
    rows = []
    for n in range(1, args.levels + 1):
        G = permgrp.level_quotient(table, n)
        order = G.order
        if args.oracle:
            bfs = len(G.elements(limit=args.oracle_limit))
            if bfs != order:
                log(f"level {n}: chain order {order} != closure {bfs}")
                return EXIT_INVARIANT
        rows.append((n, order))
        log(f"level {n}: order {order}")
    params = {"cmd": "group order", "table": args.table, "levels": args.levels}
    reporting.write_report(args.out, ["level", "order"], rows, params,
                           figure=not args.no_figures)
    return EXIT_OK


def cmd_group_nucleus(args) -> int:
    table = load_table(args)
    nuc = selfsim.nucleus(table, state_limit=args.state_limit)
    emit_json(
        {
            "states": list(nuc.state_names()),
            "size": len(nuc),
            "transitions": [list(row) for row in nuc.transitions],
            "outputs": [list(p) for p in nuc.outputs],
        },
        args.out,
    )
    return EXIT_OK


def cmd_group_activity(args) -> int:
    table = load_table(args)
    report = selfsim.activity_bound(table, args.word, args.horizon)
    rows = [(i + 1, c) for i, c in enumerate(report.counts)]
    params = {
        "cmd": "group activity", "table": args.table,
        "word": args.word, "horizon": args.horizon,
    }
    log(f"sup |A_i| = {report.sup} (certified: {report.certified})")
    reporting.write_report(args.out, ["level", "active_vertices"], rows, params,
                           figure=not args.no_figures)
    return EXIT_OK


def cmd_group_assumption_c(args) -> int:
    table = load_table(args)
    rep = selfsim.check_assumption_c(table, args.i0, args.c0, args.horizon)
    emit_json(
        {
            "passed": rep.passed,
            "i0": rep.i0,
            "c0": rep.c0,
            "horizon": rep.horizon,
            "witnesses": [
                {"level": lvl, "word": selfsim.format_word(w)}
                for lvl, w in rep.witnesses
            ],
        },
        args.out,
    )
    return EXIT_OK if rep.passed or args.allow_fail else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# coloring


def cmd_coloring(args) -> int:
    table = load_table(args)
    K = load_closed_set(args.set, table.valency)
    co = cl.color(K, args.depth)
    rows = []
    for i in range(args.depth + 1):
        rows.append(
            (i, co.red_count(i), co.green_count(i), co.blue_count(i), co.q_blue(i))
        )
    index = [treecore.format_vertex(v) for v in co.max_red]
    log(f"index set ({len(index)} vertices): {' '.join(index) or '(empty)'}")
    params = {"cmd": "coloring", "set": args.set, "depth": args.depth, "table": args.table}
    reporting.write_report(
        args.out, ["level", "red", "green", "blue", "q_b"], rows, params,
        figure=not args.no_figures,
    )
    if args.index_out:
        emit_json({"index_set": index}, args.index_out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# cosofic-sim


def cmd_cosofic_sim(args) -> int:
    table = load_table(args)
    K = load_closed_set(args.set, table.valency)
    word = args.word or table.generators[-1]
    levels = list(range(args.i_min, args.i_max + 1))

    def run_level(i: int) -> cosofic.LevelRow:
        m = i + args.c0 + args.margin
        instance = cosofic.build_instance(table, K, i, args.c0, m)
        return cosofic.simulate_level(
            instance, word, trials=args.trials, seed=args.seed, exact=args.exact
        )

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_level, levels))
    else:
        results = [run_level(i) for i in levels]

    rows = [
        (
            r.level, r.q_b, r.q_bb, r.symdiff_prob,
            r.bb2_lhs, r.bb2_rhs, r.seed if r.seed is not None else "exact",
        )
        for r in results
    ]
    params = {
        "cmd": "cosofic-sim", "table": args.table, "set": args.set,
        "word": str(word), "c0": args.c0, "margin": args.margin,
        "trials": args.trials, "seed": args.seed, "exact": args.exact,
        "i_min": args.i_min, "i_max": args.i_max,
    }
    for r in results:
        log(
            f"i={r.level} m={r.m}: q_b={r.q_b} q_bb={r.q_bb} "
            f"P(symdiff)={r.symdiff_prob} bound holds: {r.bb2_holds}"
        )
    reporting.write_report(
        args.out,
        ["level", "q_b", "q_bb", "symdiff_prob", "bb2_lhs", "bb2_rhs", "seed"],
        rows, params, figure=not args.no_figures,
    )
    if not all(r.bb2_holds for r in results):
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# bratteli subcommands


def cmd_bratteli_count(args) -> int:
    diagram = load_diagram(args.diagram)
    counts = diagram.path_count(args.level)
    rows = [(v, c) for v, c in enumerate(counts)]
    params = {"cmd": "bratteli count", "diagram": args.diagram, "level": args.level}
    reporting.write_report(args.out, ["vertex", "paths"], rows, params,
                           figure=not args.no_figures, figure_kind="bars")
    return EXIT_OK


def _pick_paths(diagram: br.BratteliDiagram, n: int, count: int) -> list:
    paths = diagram.paths(n)
    if count > len(paths):
        raise ConfigError(f"only {len(paths)} paths exist at level {n}")
    step = max(1, len(paths) // count)
    return paths[::step][:count]


def cmd_bratteli_ratio(args) -> int:
    diagram = load_diagram(args.diagram)
    U = load_clopen(args.clopen, diagram)
    zs = _pick_paths(diagram, args.level, args.paths)
    rep = br.product_ratio_bound(diagram, zs, U, args.level)
    emit_json(
        {
            "level": rep.n,
            "k": rep.k,
            "joint": str(rep.joint),
            "product": str(rep.product),
            "ratio": None if rep.ratio is None else str(rep.ratio),
            "lower_bound": None if rep.lower is None else str(rep.lower),
            "holds": rep.holds,
        },
        args.out,
    )
    return EXIT_OK if rep.holds else EXIT_INVARIANT


def cmd_bratteli_ergodic(args) -> int:
    diagram = load_diagram(args.diagram)
    U = load_clopen(args.clopen, diagram)
    x = tuple(int(c) for c in args.prefix.split(",")) if args.prefix else _pick_paths(diagram, args.level, 1)[0]
    value = br.ergodic_average_point(diagram, x, U, args.level)
    emit_json({"prefix": list(x), "level": args.level, "average": str(value)}, args.out)
    return EXIT_OK


def cmd_bratteli_bound(args) -> int:
    diagram = load_diagram(args.diagram)
    U = load_clopen(args.clopen, diagram)
    C = _pick_paths(diagram, args.level, args.paths)
    rep = br.kset_decay_bound(diagram, C, U, args.level)
    emit_json(
        {
            "level": rep.n,
            "witness_cylinder": list(rep.witness_cylinder),
            "connect_level": rep.connect_level,
            "base": str(rep.base),
            "exponent": rep.exponent,
            "bound": str(rep.bound),
            "probability": str(rep.probability),
            "holds": rep.holds,
        },
        args.out,
    )
    return EXIT_OK if rep.holds else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# self tests


def selftest_group() -> list[str]:
    failures = []
    table = selfsim.builtin("grigorchuk")
    nuc = selfsim.nucleus(table)
    if sorted(nuc.state_names()) != ["1", "a", "b", "c", "d"]:
        failures.append("grigorchuk nucleus mismatch")
    for w in ("a^2", "b^2", "c^2", "d^2", "bcd", "(ad)^4"):
        if not selfsim.is_identity(table, w).is_identity:
            failures.append(f"relation {w} not certified")
    for n in (1, 2, 3):
        G = permgrp.level_quotient(table, n)
        if G.order != len(G.elements()):
            failures.append(f"chain/closure mismatch at level {n}")
    return failures


def selftest_coloring() -> list[str]:
    failures = []
    table = selfsim.builtin("grigorchuk")
    K = cl.ClosedSetSpec.make(table.valency, [], [treecore.BoundaryRay((), (1,))])
    co = cl.color(K, 8)
    if [str(co.q_blue(i)) for i in range(4)] != ["1", "1/2", "1/4", "1/8"]:
        failures.append("spine blue proportions wrong")
    expected = [(0,), (1, 0), (1, 1, 0)]
    if list(co.max_red[:3]) != expected:
        failures.append("spine index set wrong")
    inst = cosofic.build_instance(table, K, 2, 3, 5)
    row = cosofic.simulate_level(inst, "b", trials=0, seed=0, exact=True)
    if row.symdiff_prob != Fraction(3, 16) or not row.bb2_holds:
        failures.append("exact bad-blue data drifted")
    return failures


def selftest_bratteli() -> list[str]:
    failures = []
    rng = random.Random(2024)
    for _ in range(3):
        D = br.random_simple_diagram(rng, horizon=3, max_vertices=2, max_multiplicity=3)
        n = 2
        if br.level_group_order(D, n) > 50_000:
            continue
        try:
            br._check_degrees(D, n)
        except br.DiagramError:
            continue
        paths = D.paths(n)
        U = br.ClopenSet.make(D, paths[: max(1, len(paths) // 2)])
        C = paths[:2]
        if br.inclusion_probability(D, C, U, n) != br.inclusion_probability_bruteforce(D, C, U, n):
            failures.append("inclusion probability oracle mismatch")
    B = br.odometer(2, 4)
    if B.path_count(4) != [16]:
        failures.append("odometer path count wrong")
    return failures


def cmd_selftest(args) -> int:
    suites = {
        "group": selftest_group,
        "coloring": selftest_coloring,
        "bratteli": selftest_bratteli,
    }
    chosen = [args.suite] if args.suite else sorted(suites)
    failed = False
    for name in chosen:
        failures = suites[name]()
        status = "ok" if not failures else "FAIL"
        print(f"selftest {name}: {status}")
        for f in failures:
            print(f"  - {f}")
        failed = failed or bool(failures)
    return EXIT_INVARIANT if failed else EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_common(p):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip the companion PNG when writing to a file")
    p.add_argument("--selftest", action="store_true",
                   help="run this subsystem's oracle checks instead")


def _add_table_arg(p):
    p.add_argument("table", nargs="?", default="grigorchuk",
                   help="builtin name or table JSON file")
    p.add_argument("--p", type=int, default=3, help="prime for gupta_sidki")
    p.add_argument("--omega", help="omega digits, e.g. 012 or 01:2")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ssgrp",
        description="exact computations for tree groups and diagram full groups",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("group", help="recursion table computations")
    gsub = g.add_subparsers(dest="subcommand", required=True)

    p = gsub.add_parser("info", help="table summary and nucleus")
    _add_table_arg(p); _add_common(p)
    p.set_defaults(func=cmd_group_info, selftest_suite="group")

    p = gsub.add_parser("order", help="level quotient orders")
    _add_table_arg(p); _add_common(p)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--oracle", action="store_true",
                   help="cross-check orders by closure enumeration")
    p.add_argument("--oracle-limit", type=int, default=10**6)
    p.set_defaults(func=cmd_group_order, selftest_suite="group")

    p = gsub.add_parser("nucleus", help="nucleus states and transitions")
    _add_table_arg(p); _add_common(p)
    p.add_argument("--state-limit", type=int, default=200)
    p.set_defaults(func=cmd_group_nucleus, selftest_suite="group")

    p = gsub.add_parser("activity", help="per-level activity counts")
    _add_table_arg(p); _add_common(p)
    p.add_argument("--word", required=True)
    p.add_argument("--horizon", type=int, default=12)
    p.set_defaults(func=cmd_group_activity, selftest_suite="group")

    p = gsub.add_parser("assumption-c", help="contraction depth check")
    _add_table_arg(p); _add_common(p)
    p.add_argument("--i0", type=int, default=1)
    p.add_argument("--c0", type=int, required=True)
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--allow-fail", action="store_true",
                   help="exit 0 even when the check fails")
    p.set_defaults(func=cmd_group_assumption_c, selftest_suite="group")

    p = sub.add_parser("coloring", help="color a closed boundary set")
    _add_table_arg(p); _add_common(p)
    p.add_argument("--set", required=True, help="closed set JSON, file, 'empty' or 'full'")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--index-out", help="also write the index set as JSON")
    p.set_defaults(func=cmd_coloring, selftest_suite="coloring")

    p = sub.add_parser("cosofic-sim", help="approximation experiments")
    _add_table_arg(p); _add_common(p)
    p.add_argument("--set", required=True)
    p.add_argument("--word", default=None, help="element to track (default: first generator)")
    p.add_argument("--i-min", type=int, default=1)
    p.add_argument("--i-max", type=int, default=3)
    p.add_argument("--c0", type=int, default=3)
    p.add_argument("--margin", type=int, default=0,
                   help="extra quotient depth beyond i + c0")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--exact", action="store_true",
                   help="exhaustive conjugacy-class enumeration instead of sampling")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_cosofic_sim, selftest_suite="coloring")

    b = sub.add_parser("bratteli", help="diagram computations")
    bsub = b.add_subparsers(dest="subcommand", required=True)

    p = bsub.add_parser("count", help="path counts per vertex")
    p.add_argument("--diagram", required=True,
                   help="odometerD (e.g. odometer2), JSON file or inline JSON")
    p.add_argument("--level", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bratteli_count, selftest_suite="bratteli")

    p = bsub.add_parser("ratio", help="joint vs product inclusion ratio")
    p.add_argument("--diagram", required=True)
    p.add_argument("--clopen", required=True, help="clopen JSON, file, 'full' or 'empty'")
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--level", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bratteli_ratio, selftest_suite="bratteli")

    p = bsub.add_parser("ergodic", help="single-path ergodic average")
    p.add_argument("--diagram", required=True)
    p.add_argument("--clopen", required=True)
    p.add_argument("--prefix", help="comma-separated edge indices")
    p.add_argument("--level", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bratteli_ergodic, selftest_suite="bratteli")

    p = bsub.add_parser("bound", help="exponential decay bound check")
    p.add_argument("--diagram", required=True)
    p.add_argument("--clopen", required=True)
    p.add_argument("--paths", type=int, default=2)
    p.add_argument("--level", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bratteli_bound, selftest_suite="bratteli")

    p = sub.add_parser("selftest", help="oracle-equivalence self tests")
    p.add_argument("--suite", choices=["group", "coloring", "bratteli"])
    p.set_defaults(func=cmd_selftest)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "selftest", False) and hasattr(args, "selftest_suite"):
        return cmd_selftest(argparse.Namespace(suite=args.selftest_suite))
    try:
        return args.func(args)
    except (ConfigError, json.JSONDecodeError, FileNotFoundError) as exc:
        log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except treecore.LevelCapExceeded as exc:
        log(f"cap exceeded: {exc}")
        return EXIT_CAP
    except (ValueError, br.DiagramError) as exc:
        log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except AssertionError as exc:
        log(f"internal invariant violation: {exc}")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
