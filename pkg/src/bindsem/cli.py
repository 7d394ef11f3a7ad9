"""Command-line front end: validation, rewriting, stepping, folds, suites.

Every command is deterministic under a fixed seed; JSON output is emitted with
sorted keys so golden files stay byte-stable.  Exit codes: 0 success, 2
validation failure, 3 budget exhausted, 4 no derivation found.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import laws as laws_mod
from . import model as model_mod
from . import operational as op_mod
from .equation import BudgetError, normalize
from .metaterm import MVar
from .reduction import derive, reduction_graph, step, trace
from .signature import (
    BUILTIN_NAMES,
    SigError,
    SignatureDoc,
    builtin,
    parse_signature,
    print_signature,
    validate,
)
from .terms import TermError, parse_term, print_term

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BUDGET = 3
EXIT_NO_DERIVATION = 4


def _budget(name: str, default: int) -> int:
    return int(os.environ.get(f"BINDSEM_BUDGET_{name.upper()}", default))


def load_signature(spec: str) -> SignatureDoc:
    if spec in BUILTIN_NAMES:
        return builtin(spec)
    path = Path(spec)
    if not path.exists():
        raise SigError(f"no builtin or file named {spec}")
    return parse_signature(path.read_text())


def _scope(args) -> list[str]:
    if not args.scope:
        return []
    return [s.strip() for s in args.scope.split(",") if s.strip()]


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(text)


def _term_of(args, doc: SignatureDoc):
    names = _scope(args)
    layer = getattr(args, "layer", "term")
    if layer == "state":
        return op_mod.parse_state(args.term, len(names), doc, "state1", names), names
    return parse_term(args.term, len(names), doc, names), names


def _show(t, doc, names, layer="term") -> str:
    if layer == "state":
        return op_mod.print_state(t, doc, "state1", names)
    return print_term(t, doc, names)


def _show_target(t, doc, names, layer="term") -> str:
    if layer == "state":
        return op_mod.print_state(t, doc, "state2", names)
    return print_term(t, doc, names)


# ---------------------------------------------------------------------------
# Commands

def cmd_check(args) -> int:
    doc = load_signature(args.sig)
    report = validate(doc)
    payload = {
        "accepted": report.accepted,
        "items": [
            {"stage": i.stage, "subject": i.subject, "ok": i.ok, "message": i.message}
            for i in report.items
        ],
    }
    _emit(args, payload, report.render())
    return EXIT_OK if report.accepted else EXIT_INVALID


def cmd_print(args) -> int:
    doc = load_signature(args.sig)
    sys.stdout.write(print_signature(doc))
    return EXIT_OK


def cmd_normalize(args) -> int:
    doc = load_signature(args.sig)
    t, names = _term_of(args, doc)
    budget = _budget("normalize", args.budget)
    try:
        tr = normalize(t, doc, len(names), budget=budget)
    except BudgetError as e:
        print(f"budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET
    lines = []
    if args.trace:
        for (path, eq, before, after) in tr.steps:
            pos = ".".join(str(p) for p in path) or "root"
            lines.append(f"  {eq} @ {pos}: {print_term(before, doc, names)}"
                         f" -> {print_term(after, doc, names)}")
    lines.append(print_term(tr.result, doc, names))
    payload = {
        "result": print_term(tr.result, doc, names),
        "steps": [
            {"position": list(path), "equation": eq}
            for (path, eq, _, _) in tr.steps
        ],
    }
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def _splice_closure(doc: SignatureDoc) -> SignatureDoc:
    from .signature import closure_pack

    have = {r.name for r in doc.rules}
    return doc.with_rules([r for r in closure_pack() if r.name not in have])


def cmd_step(args) -> int:
    doc = load_signature(args.sig)
    t, names = _term_of(args, doc)
    rules = args.rules.split(",") if args.rules else None
    if args.layer == "state":
        if doc.state_canonicalizer == "pi-struct":
            ds = op_mod.pi_step(t, doc, len(names))
        else:
            ds = op_mod.het_step(t, doc, len(names), rules=rules)
    else:
        doc2 = _splice_closure(doc) if args.closure else doc
        ds = step(t, doc2, len(names), with_congruence=args.congruence, rules=rules)
    rows = [
        {
            "rule": d.rule,
            "source": _show(d.source, doc, names, args.layer),
            "target": _show_target(d.target, doc, names, args.layer),
        }
        for d in ds
    ]
    text = "\n".join(f"{r['rule']}: {r['source']} ~> {r['target']}" for r in rows)
    _emit(args, {"steps": rows}, text if rows else "(no steps)")
    return EXIT_OK


def cmd_trace(args) -> int:
    doc = load_signature(args.sig)
    t, names = _term_of(args, doc)
    rules = args.rules.split(",") if args.rules else None
    if args.layer == "state":
        tr = op_mod.het_trace(t, doc, len(names), max_steps=args.max)
        truncated = tr.truncated
        rows = [
            {"rule": d.rule, "target": _show_target(d.target, doc, names, "state")}
            for d in tr.steps
        ]
        final = rows[-1]["target"] if rows else _show(t, doc, names, "state")
    else:
        doc2 = _splice_closure(doc) if args.closure else doc
        tr = trace(
            t, doc2, len(names), max_steps=args.max, strategy=args.strategy,
            with_congruence=args.congruence, rules=rules,
        )
        truncated = tr.truncated
        rows = [
            {"rule": d.rule, "target": print_term(d.target, doc, names)}
            for d in tr.steps
        ]
        final = rows[-1]["target"] if rows else print_term(
            normalize(t, doc, len(names)).result, doc, names
        )
    lines = [f"{i + 1}. {r['rule']}: {r['target']}" for i, r in enumerate(rows)]
    lines.append(f"final: {final}" + (" (truncated)" if truncated else ""))
    _emit(args, {"steps": rows, "final": final, "truncated": truncated},
          "\n".join(lines))
    return EXIT_OK


def cmd_derive(args) -> int:
    doc = load_signature(args.sig)
    t, names = _term_of(args, doc)
    depth = _budget("depth", args.depth)
    max_steps = _budget("steps", args.steps)
    if args.target:
        if args.layer == "state":
            goal = op_mod.parse_state(args.target, len(names), doc, "state2", names)
        else:
            goal = parse_term(args.target, len(names), doc, names)
    else:
        goal = MVar("GOAL")
    if args.layer == "state":
        res = op_mod.het_derive(t, goal, doc, len(names), depth=depth,
                                max_steps=max_steps)
    else:
        res = derive(t, goal, doc, len(names), depth=depth, max_steps=max_steps,
                     with_congruence=args.congruence, with_closure=args.closure)
    rows = [
        {
            "rule": d.rule,
            "source": _show(d.source, doc, names, args.layer),
            "target": _show_target(d.target, doc, names, args.layer),
        }
        for d in res.derivations
    ]
    text = "\n".join(f"{r['rule']}: {r['source']} ~> {r['target']}" for r in rows)
    _emit(args, {"derivations": rows, "exhausted": res.exhausted},
          text if rows else "(no derivations)")
    if rows:
        return EXIT_OK
    return EXIT_BUDGET if res.exhausted else EXIT_NO_DERIVATION


def cmd_fold(args) -> int:
    doc = load_signature(args.sig)
    t, names = _term_of(args, doc)
    model = model_mod.builtin_model(args.model)
    if args.model == "free_vars":
        env = [frozenset({nm}) for nm in names]
        value = model_mod.fold(t, env, model, doc)
        rendered = "{" + ", ".join(sorted(value)) + "}"
    elif args.model == "size":
        value = model_mod.fold(t, [0] * len(names), model, doc)
        rendered = str(value)
    else:
        value = model_mod.fold(t, [(0, 0)] * len(names), model, doc)[0]
        rendered = str(value)
    _emit(args, {"model": args.model, "value": rendered}, rendered)
    return EXIT_OK


def cmd_translate(args) -> int:
    tr = model_mod.catalog_translation(args.map)
    doc = tr.source
    names = _scope(args)
    t = parse_term(args.term, len(names), doc, names)
    if args.derive_rule:
        ds = [d for d in step(t, doc, len(names)) if d.rule == args.derive_rule]
        if not ds:
            print(f"no {args.derive_rule} derivation out of the term",
                  file=sys.stderr)
            return EXIT_NO_DERIVATION
        image = model_mod.translate_derivation(ds[0], tr)
        payload = {
            "rule": image.rule,
            "source": print_term(image.source, tr.target, names),
            "target": print_term(image.target, tr.target, names),
        }
        text = f"{image.rule}: {payload['source']} ~> {payload['target']}"
    else:
        out = model_mod.translate(t, tr, len(names))
        payload = {"result": print_term(out, tr.target, names)}
        text = payload["result"]
    _emit(args, payload, text)
    return EXIT_OK


def cmd_laws(args) -> int:
    doc = load_signature(args.sig)
    suites = args.suite.split(",") if args.suite else list(laws_mod.SUITES)
    results = [
        laws_mod.run_suite(s, doc, args.sig, args.count, args.seed)
        for s in suites
    ]
    rows = [
        {"suite": r.suite, "signature": r.signature, "cases": r.cases,
         "passed": r.passed, "ok": r.ok}
        for r in results
    ]
    _emit(args, {"results": rows}, "\n".join(r.line() for r in results))
    return EXIT_OK if all(r.ok for r in results) else 1


def cmd_graph(args) -> int:
    doc = load_signature(args.sig)
    names = _scope(args)
    seeds = [
        parse_term(s.strip(), len(names), doc, names)
        for s in args.seeds.split(";")
        if s.strip()
    ]
    rules = args.rules.split(",") if args.rules else None
    g = reduction_graph(
        seeds, doc, len(names),
        max_nodes=_budget("nodes", args.max_nodes),
        max_edges=_budget("edges", args.max_edges),
        with_congruence=args.congruence,
        rules=rules,
    )
    payload = graph_json(g, doc, names)
    if args.format == "dot":
        print(graph_dot(g, doc, names))
    elif args.format == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(f"{len(g.nodes)} nodes, {len(g.edges)} edges"
              + (" (bounds exhausted)" if g.exhausted else ""))
        for (i, j, rule) in g.edges:
            print(f"  {print_term(g.nodes[i], doc, names)} -[{rule}]-> "
                  f"{print_term(g.nodes[j], doc, names)}")
    return EXIT_BUDGET if g.exhausted and args.strict_bounds else EXIT_OK


def graph_json(g, doc, names) -> dict:
    return {
        "nodes": [
            {"id": i, "term": print_term(t, doc, names)}
            for i, t in enumerate(g.nodes)
        ],
        "edges": [
            {"src": i, "dst": j, "rule": rule} for (i, j, rule) in g.edges
        ],
        "exhausted": g.exhausted,
    }


def graph_dot(g, doc, names) -> str:
    lines = ["digraph reduction {"]
    for i, t in enumerate(g.nodes):
        label = print_term(t, doc, names).replace('"', '\\"')
        lines.append(f'  n{i} [label="{label}"];')
    for (i, j, rule) in g.edges:
        lines.append(f'  n{i} -> n{j} [label="{rule}"];')
    lines.append("}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    from .report import write_report

    written = write_report(Path(args.out), seed=args.seed, count=args.count)
    for path in written:
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing

def _common(p, term=True):
    p.add_argument("--sig", required=True, help="builtin name or signature file")
    if term:
        p.add_argument("--term", required=True)
        p.add_argument("--scope", default="", help="comma-separated free variables")
        p.add_argument("--layer", choices=("term", "state"), default="term")
    p.add_argument("--format", choices=("text", "json"), default="text")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="bindsem",
        description="signature-driven engine for syntax with binding",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a signature")
    p.add_argument("--sig", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("print", help="re-emit a signature in the grammar")
    p.add_argument("--sig", required=True)
    p.set_defaults(func=cmd_print)

    p = sub.add_parser("normalize", help="rewrite to the canonical form")
    _common(p)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--budget", type=int, default=10**5)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("step", help="enumerate one-step derivations")
    _common(p)
    p.add_argument("--congruence", action="store_true")
    p.add_argument("--closure", action="store_true")
    p.add_argument("--rules", default="")
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("trace", help="iterate steps under a strategy")
    _common(p)
    p.add_argument("--max", type=int, default=100)
    p.add_argument("--strategy", default="leftmost-outermost",
                   choices=("leftmost-outermost", "leftmost-innermost",
                            "enumerate-all"))
    p.add_argument("--congruence", action="store_true")
    p.add_argument("--closure", action="store_true")
    p.add_argument("--rules", default="")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("derive", help="search derivations toward a target")
    _common(p)
    p.add_argument("--target", default="", help="goal term (default: any)")
    p.add_argument("--depth", type=int, default=32)
    p.add_argument("--steps", type=int, default=10**4)
    p.add_argument("--congruence", action="store_true")
    p.add_argument("--closure", action="store_true")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("fold", help="fold a term through a builtin model")
    _common(p)
    p.add_argument("--model", required=True, choices=model_mod.MODEL_NAMES)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("translate", help="translate along a catalog translation")
    p.add_argument("--map", required=True, choices=model_mod.TRANSLATION_NAMES)
    p.add_argument("--term", required=True)
    p.add_argument("--scope", default="")
    p.add_argument("--derive-rule", default="",
                   help="translate the first derivation of this rule instead")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("laws", help="run the randomized invariant suites")
    p.add_argument("--sig", required=True)
    p.add_argument("--suite", default="", help="comma-separated suite names")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_laws)

    p = sub.add_parser("graph", help="export a bounded reduction graph")
    p.add_argument("--sig", required=True)
    p.add_argument("--seeds", required=True, help="semicolon-separated terms")
    p.add_argument("--scope", default="")
    p.add_argument("--max-nodes", type=int, default=200)
    p.add_argument("--max-edges", type=int, default=1000)
    p.add_argument("--congruence", action="store_true")
    p.add_argument("--rules", default="")
    p.add_argument("--strict-bounds", action="store_true")
    p.add_argument("--format", choices=("text", "json", "dot"), default="text")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("report", help="law suites over the corpus + figures")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.set_defaults(func=cmd_report)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (SigError, TermError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except BudgetError as e:
        print(f"budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
