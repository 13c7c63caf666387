"""Command-line front end."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .absorption import domain_algebra, minimal_absorbing
from .affine import affine_consistency_pass, format_report
from .algebra import term_to_str
from .benchmarks import KINDS, generate_benchmark
from .consistency import BinaryInstance, binarize, enforce_1_consistency, enforce_23_consistency, run_lac, run_slac
from .csp import algebra_of, oracle_solve, search_special_polymorphism
from .errors import InvariantError, NotApplicableError, PreconditionError, ResourceLimitError
from .solver import SolverConfig, detect_edge, solve

EXIT_OK, EXIT_NO, EXIT_USAGE, EXIT_RESOURCE, EXIT_INTERNAL = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p: argparse.ArgumentParser, inputs: bool = True) -> None:
    if inputs:
        p.add_argument("--template", required=True)
        p.add_argument("--instance")
    p.add_argument("--k-edge", type=int, dest="k_edge")
    p.add_argument("--term-depth", type=int, default=3)
    p.add_argument("--gen-cap", type=int, default=2)
    p.add_argument("--verify-paths", action="store_true")
    p.add_argument("--check-invariants", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--output", "-o")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fewsubpowers", description="Decide CSPs over templates with few subpowers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("solve", help="run the full decision procedure")
    _common(p)
    p.add_argument("--no-witness", action="store_true", help="skip witness extraction on SAT")
    for name, text in [("oracle", "brute-force backtracking search"),
                       ("lac", "linear arc consistency on the binarized instance"),
                       ("slac", "singleton linear arc consistency on the binarized instance"),
                       ("pc23", "(2,3)-consistency on the binarized instance"),
                       ("affine", "one affine-consistency pass after the propagation steps")]:
        _common(sub.add_parser(name, help=text))
    p = sub.add_parser("absorb", help="minimal witnessed absorbing subuniverses")
    _common(p, inputs=False)
    p.add_argument("--algebra")
    p.add_argument("--template")
    p.add_argument("--instance")
    p = sub.add_parser("polysearch", help="search a template for a special polymorphism")
    _common(p, inputs=False)
    p.add_argument("--template", required=True)
    p.add_argument("--kind", required=True, choices=["maltsev", "majority", "nu", "edge"])
    p.add_argument("--arity", type=int, help="arity for nu, k for edge")
    p = sub.add_parser("gen", help="write a seeded benchmark")
    _common(p, inputs=False)
    p.add_argument("--kind", required=True, choices=KINDS)
    for flag in ("p", "vars", "eqs", "clauses", "size", "relations", "arity", "constraints"):
        p.add_argument(f"--{flag}", type=int)
    p.add_argument("--algebra-kind", dest="algebra", choices=["affine", "majority"])
    p.add_argument("--out-dir", help="write template.json and instance.json here")
    p = sub.add_parser("verify", help="replay a saved solve report and diff")
    _common(p)
    p.add_argument("--report", required=True)
    return parser


def _config(args, witness: bool = False) -> SolverConfig:
    return SolverConfig(k_edge_arity=args.k_edge, term_depth_bound=args.term_depth,
                        subuniverse_generator_cap=args.gen_cap, verify_paths=args.verify_paths,
                        check_invariants=args.check_invariants, seed=args.seed, jobs=args.jobs, witness=witness)


def _inputs(args):
    if not args.instance:
        raise PreconditionError("--instance is required")
    t = io.load_template(args.template)
    return t, io.load_instance(args.instance, t)


def _binary(args) -> BinaryInstance:
    t, inst = _inputs(args)
    k, edge = detect_edge(t, _config(args))
    return binarize(inst, algebra_of(t, [edge]), k)


def _domains(b: BinaryInstance | None) -> dict | None:
    if b is None:
        return None
    return {x: sorted(b.domain(x)) for x in b.variables}


def _fmt_domains(doms: dict | None) -> str:
    if doms is None:
        return "(empty)"
    return "\n".join(f"{x}: {{{','.join(map(str, vs))}}}" for x, vs in doms.items())


def _fmt_assignment(a: dict | None) -> str:
    return " ".join(f"{x}={v}" for x, v in a.items()) if a else "(none)"


def cmd_solve(args):
    t, inst = _inputs(args)
    report = solve(t, inst, _config(args, witness=not args.no_witness))
    doc = {"command": "solve", "status": report.decision, **report.to_json()}
    text = [report.decision]
    if report.witness is not None:
        text.append("witness " + _fmt_assignment(doc["witness"]))
    text.append("stats " + " ".join(f"{k}={v}" for k, v in sorted(report.stats.items())))
    if args.trace:
        text += report.trace
    return (EXIT_OK if report.sat else EXIT_NO), doc, text


def cmd_oracle(args):
    _, inst = _inputs(args)
    sol = oracle_solve(inst)
    status = "SAT" if sol is not None else "UNSAT"
    doc = {"command": "oracle", "status": status, "decision": status, "assignment": sol}
    return (EXIT_OK if sol is not None else EXIT_NO), doc, [status, "assignment " + _fmt_assignment(sol)]


def _propagation(args, name: str, result: BinaryInstance | None, trace: list):
    status = "CONSISTENT" if result is not None else "CONTRADICTION"
    doc = {"command": name, "status": status, "domains": _domains(result)}
    text = [status, _fmt_domains(doc["domains"])]
    if args.trace:
        doc["trace"] = trace
        text += trace
    return (EXIT_OK if result is not None else EXIT_NO), doc, text


def cmd_pc23(args):
    trace: list[str] = []
    return _propagation(args, "pc23", enforce_23_consistency(_binary(args), trace), trace)


def cmd_lac(args):
    b = _binary(args)
    ok = not b.is_empty() and run_lac(b, {x: b.domain(x) for x in b.variables})
    return _propagation(args, "lac", b if ok else None, [])


def cmd_slac(args):
    b = _binary(args)
    trace: list[str] = []
    store = None if b.is_empty() else run_slac(b, trace)
    if store is None:
        return _propagation(args, "slac", None, trace)
    mask = b.domains.copy()
    for i, x in enumerate(b.variables):
        mask[i] = False
        mask[i, sorted(store[x])] = True
    return _propagation(args, "slac", b.restrict(mask), trace)


def cmd_affine(args):
    cfg = _config(args)
    trace: list[str] = []
    b = enforce_23_consistency(_binary(args), trace)
    if b is not None:
        b = enforce_1_consistency(b, trace)
    report: list[dict] = []
    passives = []
    if b is not None:
        b, passives = affine_consistency_pass(b, cfg.affine_caps(), trace, {}, report)
    code, doc, text = _propagation(args, "affine", b, trace)
    doc["tests"] = report
    doc["stats"] = {"test_pairs": len(report), "passives": len(passives)}
    text.insert(1, format_report(report))
    return code, doc, text


def cmd_absorb(args):
    if args.algebra:
        algebras = [("algebra", io.load_algebra(args.algebra), None)]
    elif args.template:
        b = _binary(args)
        algebras = [(x, *domain_algebra(b, x)) for x in b.variables]
    else:
        raise PreconditionError("absorb needs --algebra or --template/--instance")
    found, text = [], []
    for name, alg, elems in algebras:
        hit = minimal_absorbing(alg, args.term_depth)
        entry = {"target": name, "subuniverse": None, "witness": None}
        if hit is not None:
            sub, w = hit
            members = sorted(sub.elements) if elems is None else sorted(elems[a] for a in sub.elements)
            entry = {"target": name, "subuniverse": members, "witness": term_to_str(alg, w.term)}
        found.append(entry)
        text.append(f"{name}: " + ("none" if hit is None else
                                   f"{{{','.join(map(str, entry['subuniverse']))}}} by {entry['witness']}"))
    any_found = any(e["subuniverse"] is not None for e in found)
    status = "FOUND" if any_found else "NOT_FOUND"
    return (EXIT_OK if any_found else EXIT_NO), {"command": "absorb", "status": status, "absorbers": found}, \
        [status] + text


def cmd_polysearch(args):
    t = io.load_template(args.template)
    res = search_special_polymorphism(t, args.kind, args.arity)
    status = "FOUND" if res.operation is not None else "NOT_FOUND"
    doc = {"command": "polysearch", "status": status, "complete": res.complete,
           "operation": None if res.operation is None else res.operation.to_json()}
    text = [f"{status} strategy={res.strategy} complete={res.complete}"]
    if res.operation is not None:
        text.append("table " + " ".join(map(str, res.operation.table)))
    return (EXIT_OK if res.operation is not None else EXIT_NO), doc, text


def cmd_gen(args):
    params = {k: getattr(args, k) for k in ("p", "vars", "eqs", "clauses", "size", "relations", "arity",
                                             "constraints", "algebra") if getattr(args, k) is not None}
    bm = generate_benchmark(args.kind, params, args.seed)
    doc = {"command": "gen", "status": "GENERATED", "template": bm.template.to_json(),
           "instance": bm.instance.to_json(), "label": bm.label}
    text = [f"generated {args.kind} seed={args.seed} variables={len(bm.instance.variables)} "
            f"constraints={len(bm.instance.constraints)} label={bm.label}"]
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "template.json").write_text(io.dumps(doc["template"]))
        (out / "instance.json").write_text(io.dumps(doc["instance"]))
        text.append(f"wrote {out / 'template.json'} {out / 'instance.json'}")
    return EXIT_OK, doc, text


def cmd_verify(args):
    saved = io.read_json(args.report)
    io.validate(saved, "report")
    if saved.get("command") != "solve":
        raise PreconditionError("verify replays solve reports only")
    t, inst = _inputs(args)
    fresh = solve(t, inst, _config(args, witness=saved.get("witness") is not None)).to_json()
    diffs = []
    for key in ("decision", "witness", "stats"):
        if saved.get(key) != fresh[key]:
            diffs.append(f"{key}: saved {saved.get(key)!r} fresh {fresh[key]!r}")
    old, new = saved.get("trace", []), fresh["trace"]
    for n, (a, b) in enumerate(zip(old, new)):
        if a != b:
            diffs.append(f"trace line {n}: saved {a!r} fresh {b!r}")
            break
    if len(old) != len(new):
        diffs.append(f"trace length: saved {len(old)} fresh {len(new)}")
    status = "MISMATCH" if diffs else "MATCH"
    return (EXIT_NO if diffs else EXIT_OK), {"command": "verify", "status": status, "differences": diffs}, \
        [status] + diffs


COMMANDS = {"solve": cmd_solve, "oracle": cmd_oracle, "lac": cmd_lac, "slac": cmd_slac, "pc23": cmd_pc23,
            "affine": cmd_affine, "absorb": cmd_absorb, "polysearch": cmd_polysearch, "gen": cmd_gen,
            "verify": cmd_verify}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        code, doc, text = COMMANDS[args.command](args)
        out = io.dumps(doc) if args.json else "\n".join(text) + "\n"
    except PreconditionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceLimitError, NotApplicableError) as e:
        print(f"resource: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except InvariantError as e:
        print(f"internal: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.output:
        Path(args.output).write_text(out)
    else:
        sys.stdout.write(out)
    return code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
