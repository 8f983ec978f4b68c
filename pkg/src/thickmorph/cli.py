"""Command-line front end: batch computation and verification with
deterministic JSON reports.

Exit codes: 0 success / verification true, 1 verification false (the report
carries the witness), 2 usage or parse errors.  Reports are built in a fixed
key order and rendered with canonical expression strings, so identical inputs
produce byte-identical output.

Subcommands ``-h`` flags name test functions, so subparsers disable the
automatic help shorthand; ``--help`` still works everywhere.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import functional as fn
from . import hamilton, parse, thick
from .parse import ParseError, render_canonical
from .ring import Poly, UsageError
from .thick import _RESERVED, ChartPair


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("cap must be >= 1")
    return value


def _resolve_exprs(value: str) -> list[tuple[str, str]]:
    """Expand an '<expr>' or '@file' argument into (location, text) pairs."""
    if value.startswith("@"):
        path = value[1:]
        return [(f"{path}:{lineno}", text) for lineno, text in parse.expression_lines(path)]
    return [("<arg>", value)]


def _scan_params(texts) -> set[str]:
    params: set[str] = set()
    for text in texts:
        for sym in parse.scan_symbols(text):
            if not _RESERVED.match(sym):
                params.add(sym)
    return params


def _parse_at(chart: ChartPair, loc: str, text: str) -> Poly:
    try:
        return chart.poly(text)
    except ParseError as exc:
        raise UsageError(f"{loc}: {exc}") from None


def _expr_texts(values) -> list[str]:
    texts = []
    for value in values:
        for _, text in _resolve_exprs(value):
            texts.append(text)
    return texts


def _load_gen(args, extra_exprs=(), allow_corruption=False):
    """Read the -S fixture, folding parameters from the other inputs into the chart."""
    extra = _scan_params(extra_exprs)
    fixture = thick.read_genfunction(args.genfunction, extra_params=tuple(extra))
    if fixture.corruption and not allow_corruption:
        raise UsageError(f"{args.genfunction}: corruption lines are not valid for this command")
    return fixture


def _functional_from_fixture(fixture: thick.GenFixture, cap: int) -> fn.Functional:
    if fixture.corruption:
        return fn.corrupted_thick_functional(fixture.gen, cap, fixture.corruption)
    return fn.thick_functional(fixture.gen, cap)


def _graded_report(value: Poly) -> dict[str, str]:
    out = {}
    for k in sorted({exp[value.table.lam_index] for exp in value.terms}):
        out[str(k)] = render_canonical(value.grade_component(k))
    return out


def _witness_str(witness: Poly | None) -> str | None:
    return None if witness is None else render_canonical(witness)


# -- command handlers ---------------------------------------------------------


def _cmd_pullback(args):
    g_items = _resolve_exprs(args.g)
    if len(g_items) != 1:
        raise UsageError("pullback expects exactly one g expression")
    fixture = _load_gen(args, [t for _, t in g_items])
    g = _parse_at(fixture.gen.chart, *g_items[0])
    value = thick.pullback(fixture.gen, g, args.cap).value
    return 0, _graded_report(value)


def _cmd_ymap(args):
    g_items = _resolve_exprs(args.g)
    if len(g_items) != 1:
        raise UsageError("ymap expects exactly one g expression")
    fixture = _load_gen(args, [t for _, t in g_items])
    chart = fixture.gen.chart
    g = _parse_at(chart, *g_items[0])
    ymap = thick.solve_y_map(fixture.gen, g, args.cap)
    return 0, {chart.y(a): _graded_report(ymap.component(a)) for a in range(1, chart.dim_n + 1)}


def _cmd_associate(args):
    fixture = _load_gen(args, allow_corruption=True)
    L = _functional_from_fixture(fixture, args.cap)
    S_L = fn.associate(L)
    tensors = []
    for k in sorted(S_L.tensors):
        for idx in sorted(S_L.tensors[k]):
            tensors.append(
                {"order": k, "index": list(idx), "value": render_canonical(S_L.tensors[k][idx])}
            )
    chart = fixture.gen.chart
    return 0, {"dims": [chart.dim_m, chart.dim_n], "k_q": S_L.k_q, "tensors": tensors}


def _cmd_verify_hom(args):
    g_items = _resolve_exprs(args.g)
    if len(g_items) != 1:
        raise UsageError("verify-hom expects exactly one g expression")
    h_items = [item for value in args.h for item in _resolve_exprs(value)]
    if not h_items:
        raise UsageError("verify-hom needs at least one -h function")
    texts = [t for _, t in g_items] + [t for _, t in h_items]
    fixture = _load_gen(args, texts, allow_corruption=True)
    chart = fixture.gen.chart
    g = _parse_at(chart, *g_items[0])
    hs = [(loc, _parse_at(chart, loc, text), text) for loc, text in h_items]
    if len(hs) == 1:
        hs.append(hs[0])
    L = _functional_from_fixture(fixture, args.cap)
    checks = []
    all_ok = True
    for i in range(len(hs)):
        for j in range(i, len(hs)):
            result = fn.homomorphism_check(L, g, hs[i][1], hs[j][1], args.cap)
            all_ok = all_ok and result.ok
            checks.append(
                {
                    "h1": hs[i][2],
                    "h2": hs[j][2],
                    "ok": result.ok,
                    "witness": _witness_str(result.witness),
                }
            )
    return (0 if all_ok else 1), {"ok": all_ok, "order": args.cap, "checks": checks}


def _cmd_roundtrip(args):
    f_items = [item for value in args.f for item in _resolve_exprs(value)]
    if not f_items:
        raise UsageError("roundtrip needs at least one -f test function")
    fixture = _load_gen(args, [t for _, t in f_items], allow_corruption=True)
    chart = fixture.gen.chart
    gs = [_parse_at(chart, loc, text) for loc, text in f_items]
    L = _functional_from_fixture(fixture, args.cap)
    report = fn.roundtrip_verify(L, args.cap, gs)
    entries = [
        {
            "order": e.order,
            "status": "ok" if e.ok else "fail",
            "witness": _witness_str(e.witness),
        }
        for e in report.entries
    ]
    return (0 if report.ok else 1), entries


def _cmd_polarise(args):
    g_items = [item for value in args.g for item in _resolve_exprs(value)]
    if not g_items:
        raise UsageError("polarise needs at least one -g function")
    k = len(g_items)
    cap = args.cap if args.cap is not None else k
    fixture = _load_gen(args, [t for _, t in g_items], allow_corruption=True)
    chart = fixture.gen.chart
    gs = [_parse_at(chart, loc, text) for loc, text in g_items]
    L = _functional_from_fixture(fixture, cap)
    value = fn.polarise(L, k, gs)
    return 0, {"order": k, "value": render_canonical(value)}


def _cmd_brackets(args):
    f_items = [item for value in args.f for item in _resolve_exprs(value)]
    lines = parse.expression_lines(args.hm)
    params = _scan_params([t for _, t in lines[1:]] + [t for _, t in f_items])
    header = lines[0][1].split() if lines else []
    if len(header) != 3 or header[0] != "dims":
        raise UsageError(f"{args.hm}: expected header 'dims m K_p'")
    dim = int(header[1])
    chart = ChartPair(dim, dim, tuple(params))
    H = hamilton.read_hamiltonian(args.hm, chart, hamilton.SIDE_M)
    fs = [_parse_at(chart, loc, text) for loc, text in f_items]
    value = hamilton.derived_bracket(H, fs)
    return 0, {"order": len(fs), "value": render_canonical(value)}


def _load_hamiltonian_pair(args, fixture):
    chart = fixture.gen.chart
    H_M = hamilton.read_hamiltonian(args.hm, chart, hamilton.SIDE_M)
    H_N = hamilton.read_hamiltonian(args.hn, chart, hamilton.SIDE_N)
    return H_M, H_N


def _ham_param_texts(*paths):
    texts = []
    for path in paths:
        lines = parse.expression_lines(path)
        texts.extend(t for _, t in lines[1:])
    return texts


def _cmd_s_related(args):
    fixture = _load_gen(args, _ham_param_texts(args.hm, args.hn))
    H_M, H_N = _load_hamiltonian_pair(args, fixture)
    result = hamilton.s_related_check(H_M, H_N, fixture.gen, args.q_cap)
    code = 0 if result.ok else 1
    return code, {"related": result.ok, "q_cap": args.q_cap, "witness": _witness_str(result.witness)}


def _cmd_morphism_check(args):
    g_items = _resolve_exprs(args.g)
    if len(g_items) != 1:
        raise UsageError("morphism-check expects exactly one g expression")
    fixture = _load_gen(args, _ham_param_texts(args.hm, args.hn) + [g_items[0][1]])
    H_M, H_N = _load_hamiltonian_pair(args, fixture)
    g = _parse_at(fixture.gen.chart, *g_items[0])
    result = hamilton.bracket_morphism_check(
        fixture.gen, H_M, H_N, g, args.cap, q_cap=args.q_cap
    )
    if not result.related.ok:
        status = "precondition-failed"
        witness = result.related.witness
    elif result.ok:
        status = "ok"
        witness = None
    else:
        status = "morphism-failed"
        witness = result.witness
    report = {
        "related": result.related.ok,
        "checked": result.checked,
        "status": status,
        "witness": _witness_str(witness),
    }
    return (0 if result.ok else 1), report


# -- argument parsing ----------------------------------------------------------


def _add_common(sub, *, gen=True, cap=None, g=False, h=False, f=False, hams=False, q=None):
    sub.add_argument("--help", action="help", help="show this help message and exit")
    if gen:
        sub.add_argument("-S", dest="genfunction", required=True, metavar="FILE",
                         help="generating-function fixture")
    if cap == "required":
        sub.add_argument("-K", dest="cap", type=_positive_int, required=True,
                         metavar="INT", help="grading-order cap")
    elif cap == "optional":
        sub.add_argument("-K", dest="cap", type=_positive_int, default=None,
                         metavar="INT", help="grading-order cap")
    if g:
        sub.add_argument("-g", dest="g", required=(g == "required"), metavar="EXPR",
                         action="append" if g == "many" else "store",
                         help="function on the target (expression or @file)")
    if h:
        sub.add_argument("-h", dest="h", action="append", default=[], metavar="EXPR",
                         help="test direction (expression or @file; repeatable)")
    if f:
        sub.add_argument("-f", dest="f", action="append", default=[], metavar="EXPR",
                         help="function file or expression (repeatable)")
    if hams:
        sub.add_argument("--hm", required=True, metavar="FILE", help="source-side Hamiltonian")
        sub.add_argument("--hn", required=True, metavar="FILE", help="target-side Hamiltonian")
    if q == "required":
        sub.add_argument("-Q", dest="q_cap", type=_positive_int, required=True,
                         metavar="INT", help="q-degree cap")
    elif q == "optional":
        sub.add_argument("-Q", dest="q_cap", type=_positive_int, default=None,
                         metavar="INT", help="q-degree cap")
    sub.add_argument("--json", dest="json_path", default=None, metavar="PATH",
                     help="write the report to PATH instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thickmorph",
        description="Exact thick-morphism pull-backs, non-linear homomorphisms and derived brackets.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("pullback", add_help=False, help="graded pull-back of g through S")
    _add_common(sub, cap="required", g="required")
    sub.set_defaults(handler=_cmd_pullback)

    sub = subs.add_parser("ymap", add_help=False, help="formal map y(x, g)")
    _add_common(sub, cap="required", g="required")
    sub.set_defaults(handler=_cmd_ymap)

    sub = subs.add_parser("associate", add_help=False,
                          help="generating function recovered from the pull-back functional")
    _add_common(sub, cap="required")
    sub.set_defaults(handler=_cmd_associate)

    sub = subs.add_parser("verify-hom", add_help=False,
                          help="multiplicativity of the differential (exit 1 with witness on failure)")
    _add_common(sub, cap="required", g="required", h=True)
    sub.set_defaults(handler=_cmd_verify_hom)

    sub = subs.add_parser("roundtrip", add_help=False,
                          help="truncation-tower round trip on a test set")
    _add_common(sub, cap="required", f=True)
    sub.set_defaults(handler=_cmd_roundtrip)

    sub = subs.add_parser("polarise", add_help=False,
                          help="polarised order-k form on the given functions")
    _add_common(sub, cap="optional", g="many")
    sub.set_defaults(handler=_cmd_polarise)

    sub = subs.add_parser("brackets", add_help=False,
                          help="derived bracket of a Hamiltonian on functions")
    sub.add_argument("--help", action="help", help="show this help message and exit")
    sub.add_argument("--hm", required=True, metavar="FILE", help="Hamiltonian fixture")
    sub.add_argument("-f", dest="f", action="append", default=[], metavar="EXPR",
                     help="function (expression or @file; repeatable)")
    sub.add_argument("--json", dest="json_path", default=None, metavar="PATH")
    sub.set_defaults(handler=_cmd_brackets)

    sub = subs.add_parser("s-related", add_help=False,
                          help="S-relatedness of two Hamiltonians")
    _add_common(sub, hams=True, q="required")
    sub.set_defaults(handler=_cmd_s_related)

    sub = subs.add_parser("morphism-check", add_help=False,
                          help="bracket-morphism identity for an S-related pair")
    _add_common(sub, cap="required", g="required", hams=True, q="optional")
    sub.set_defaults(handler=_cmd_morphism_check)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code, report = args.handler(args)
    except (ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = json.dumps(report, indent=2) + "\n"
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
