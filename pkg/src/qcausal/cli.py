"""Command-line front end.  All logic lives in the library; this module only
parses arguments and files and formats results."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import cirel, distributions, graph, quantum, scenarios, separation
from .errors import InputError, ParseError, QCausalError, ResourceError, ValidationError

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3

EPILOG = """\
exit codes:
  0  result produced (a CONNECTED verdict is still a result)
  1  an asserted check failed (prbox-probe above its ceiling)
  2  input, parse or validation error; diagnostics name file:line
  3  a size cap was exceeded

--format jsonl emits one JSON object per result line.  Stable keys:
  dsep/qsep     {"query", "rule", "verdict", "paths"?: [{"path", "blocked_by"}]}
  ci-list       {"relation"}             closure  {"relation"} or {"comparison"}
  simulate      {"assignment": {name: value}, "p"}
  check-map     {"rule", "imap", "perfect", "witness", "missing", "extra"}
  scenario      {"scenario", key: value, ...}
  validate      {"file", "valid", "violations"}

CHSH values use outcome 0 -> +1 and 1 -> -1, i.e. E = sum (-1)^(a xor b) P(a,b|s,t).
"""


class Reporter:
    def __init__(self, fmt: str, out=None):
        self.fmt = fmt
        self.out = out or sys.stdout

    def emit(self, text: str, record: dict | None = None) -> None:
        if self.fmt == "jsonl":
            if record is not None:
                self.out.write(json.dumps(record, sort_keys=True) + "\n")
        else:
            self.out.write(text + "\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _load_dag(path: str) -> graph.Dag:
    return graph.parse_dag(_read(path), source=path)


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# verbs


def cmd_sep(args, rep: Reporter) -> int:
    g = _load_dag(args.dag)
    r = cirel.parse_relation(args.query, g.names)
    if args.verb == "dsep":
        ok = separation.d_separated(g, r.x, r.y, r.z)
    else:
        ok = separation.q_separated(g, r.x, r.y, r.z)
    verdict = "SEPARATED" if ok else "CONNECTED"
    record = {"query": cirel.format_relation(r, g.names), "rule": args.verb[0], "verdict": verdict}
    lines = [verdict]
    if args.explain:
        paths = separation.explain(g, r.x, r.y, r.z, rule=args.verb[0])
        if not ok:
            paths = [next((p, b) for p, b in paths if b is None)]
        record["paths"] = [{"path": p.format(g.names), "blocked_by": b} for p, b in paths]
        if not paths:
            lines.append("  no path connects the two sides")
        for p, b in paths:
            lines.append(f"  {p.format(g.names)}: " + ("active" if b is None else f"blocked, {b}"))
    rep.emit("\n".join(lines), record)
    return EXIT_OK


def _dag_ciset(g: graph.Dag, rule: str, ordering: str | None) -> cirel.CiSet:
    order = ordering.split(",") if ordering else None
    if rule == "d":
        return separation.ci_set_d(g)
    if rule == "q":
        return separation.ci_set_q(g)
    if rule == "causal":
        return graph.causal_input_list(g, order).ciset()
    return graph.quantum_input_list(g, order).ciset()


def cmd_ci_list(args, rep: Reporter) -> int:
    g = _load_dag(args.dag)
    s = _dag_ciset(g, args.rule, args.ordering)
    if args.closed:
        s = cirel.closure(s)
    for text in s.format(g.names):
        rep.emit(text, {"relation": text})
    return EXIT_OK


def parse_relation_file(text: str, source: str) -> tuple[list[str], cirel.CiSet]:
    """``vars A B C`` header, then one relation per line."""
    names = None
    rels = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if names is None:
            toks = line.split()
            if toks[0] != "vars" or len(toks) < 2:
                raise ParseError("expected header 'vars <name> ...'", lineno, source)
            names = toks[1:]
            if len(set(names)) != len(names):
                raise ParseError("duplicate variable name", lineno, source)
            continue
        rels.append(cirel.parse_relation(line, names, lineno, source))
    if names is None:
        raise ParseError("empty relation file", None, source)
    return names, cirel.CiSet(len(names), rels)


def cmd_closure(args, rep: Reporter) -> int:
    names, s = parse_relation_file(_read(args.relations), args.relations)
    if args.compare:
        names2, s2 = parse_relation_file(_read(args.compare), args.compare)
        if names2 != names:
            raise InputError("both relation files must declare the same variables in the same order")
        c = cirel.compare_closures(s, s2).value
        rep.emit(c, {"comparison": c})
        return EXIT_OK
    for text in cirel.closure(s).format(names):
        rep.emit(text, {"relation": text})
    return EXIT_OK


def cmd_simulate(args, rep: Reporter) -> int:
    g = _load_dag(args.dag)
    params = quantum.parse_params(_read(args.params), g, source=args.params)
    p = quantum.evaluate(quantum.Qcm(g, params))
    text = distributions.format_table(p)
    if args.out:
        _write(args.out, text)
    if rep.fmt == "jsonl":
        for line in text.splitlines()[1:]:
            toks = line.split()
            rep.emit("", {"assignment": dict(zip(p.names, map(int, toks[:-1]))), "p": float(toks[-1])})
    elif not args.out:
        rep.emit(text.rstrip("\n"))
    else:
        rep.emit(f"wrote {args.out}")
    return EXIT_OK


def _verdict_record(v: scenarios.MapVerdict, names, rule: str) -> tuple[str, dict]:
    witness = cirel.format_relation(v.witness, names) if v.witness else None
    text = (
        f"rule {rule}\nimap {str(v.imap).lower()}\nperfect {str(v.perfect).lower()}\n"
        f"witness {witness or '-'}\nmissing {v.missing}\nextra {v.extra}"
    )
    record = {"rule": rule, "imap": v.imap, "perfect": v.perfect, "witness": witness,
              "missing": v.missing, "extra": v.extra}
    return text, record


def cmd_check_map(args, rep: Reporter) -> int:
    g = _load_dag(args.dag)
    p = distributions.parse_table(_read(args.table), source=args.table)
    v = scenarios.check_map(g, p, args.rule, args.tol)
    text, record = _verdict_record(v, g.names, args.rule)
    rep.emit(text, record)
    return EXIT_OK


def cmd_validate(args, rep: Reporter) -> int:
    g = _load_dag(args.dag)
    problems = graph.quantum_violations(g)
    if args.dims:
        problems += graph.dimension_violations(g)
    record = {"file": args.dag, "valid": not problems, "violations": problems}
    if problems:
        if rep.fmt == "jsonl":
            rep.emit("", record)
        for m in problems:
            print(f"{args.dag}: {m}", file=sys.stderr)
        return EXIT_INPUT
    rep.emit(f"{args.dag}: valid", record)
    return EXIT_OK


def cmd_scenario(args, rep: Reporter) -> int:
    name = args.scenario
    if name == "bell":
        angles = args.angles or scenarios.OPTIMAL_ANGLES
        _, p = scenarios.bell_scenario(angles)
        value = scenarios.chsh(p)
        k_ok = scenarios.bell_relations_hold(p)
        rep.emit(
            "scenario bell\nangles " + " ".join(f"{a:.10f}" for a in angles)
            + f"\nchsh {value:.7f}\ntsirelson {scenarios.TSIRELSON:.7f}\nsetting_independence_and_no_signalling {str(k_ok).lower()}",
            {"scenario": "bell", "angles": list(angles), "chsh": value, "k_holds": k_ok},
        )
    elif name == "prbox":
        p = scenarios.pr_box()
        value = scenarios.chsh(p)
        k_ok = scenarios.bell_relations_hold(p)
        rep.emit(
            f"scenario prbox\nchsh {value:.7f}\nsetting_independence_and_no_signalling {str(k_ok).lower()}",
            {"scenario": "prbox", "chsh": value, "k_holds": k_ok},
        )
    elif name == "finetune":
        g, p, v = scenarios.finetune_demo(args.k_offset)
        text, record = _verdict_record(v, g.names, "d")
        rep.emit(f"scenario finetune\nk_offset {args.k_offset}\n{text}",
                 {"scenario": "finetune", "k_offset": args.k_offset, **record})
    else:
        if args.seed is None:
            raise InputError("prbox-probe needs an explicit --seed")
        report = scenarios.prbox_probe(args.draws, args.seed)
        rep.emit(report.format().rstrip("\n"), {
            "scenario": "prbox-probe", "draws": report.draws, "seed": report.seed,
            "max_chsh": report.max_value, "argmax": report.argmax,
            "ceiling": report.ceiling, "within_ceiling": report.within_ceiling,
        })
        if args.out:
            _write(args.out, report.format())
        return EXIT_OK if report.within_ceiling else EXIT_FAILED
    if args.out:
        _write(args.out, distributions.format_table(p))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcausal",
        description="Separation queries, CI closure, quantum network simulation and Bell scenarios.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--format", choices=("text", "jsonl"), default="text")
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb, rule in (("dsep", "d-separation"), ("qsep", "q-separation")):
        p = sub.add_parser(verb, help=f"test a CI query by {rule}")
        p.add_argument("dag")
        p.add_argument("query", help='e.g. "X,Y _||_ Z | W"')
        p.add_argument("--explain", action="store_true", help="list paths and blocking rules")
        p.set_defaults(func=cmd_sep)

    p = sub.add_parser("ci-list", help="list CI relations read off a DAG")
    p.add_argument("dag")
    p.add_argument("--rule", choices=("d", "q", "causal", "quantum"), default="d")
    p.add_argument("--ordering", help="comma-separated variable order for causal/quantum lists")
    p.add_argument("--closed", action="store_true", help="print the semi-graphoid closure")
    p.set_defaults(func=cmd_ci_list)

    p = sub.add_parser("closure", help="semi-graphoid closure of a relation file")
    p.add_argument("relations")
    p.add_argument("--compare", metavar="OTHER", help="compare the two closures instead")
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("simulate", help="evaluate a quantum network to a joint table")
    p.add_argument("dag")
    p.add_argument("params")
    p.add_argument("--out", help="write the table file here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-map", help="I-map / perfect-map verdict of a DAG for a table")
    p.add_argument("dag")
    p.add_argument("table")
    p.add_argument("--rule", choices=("d", "q"), default="d")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_check_map)

    p = sub.add_parser("validate", help="check a DAG's quantum-network structure")
    p.add_argument("dag")
    p.add_argument("--dims", action="store_true", help="also check Hilbert-space dimensions")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scenario", help="run a named experiment")
    p.add_argument("scenario", choices=("bell", "prbox", "finetune", "prbox-probe"))
    p.add_argument("--angles", type=float, nargs=4, metavar=("A0", "A1", "B0", "B1"))
    p.add_argument("--k-offset", type=int, default=0, help="finetune: k minus the noise value")
    p.add_argument("--draws", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the table file (report for prbox-probe) here")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    rep = Reporter(args.format)
    try:
        return args.func(args, rep)
    except ResourceError as exc:
        print(f"qcausal: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValidationError as exc:
        for m in exc.violations:
            print(f"qcausal: {m}", file=sys.stderr)
        return EXIT_INPUT
    except QCausalError as exc:
        print(f"qcausal: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
