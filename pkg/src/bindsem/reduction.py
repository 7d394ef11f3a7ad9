"""Derivation trees over a reduction signature: stepping, search, tracing.

A derivation node records the rule it applies, the assignment of the rule's
metavariables, one sub-derivation per hypothesis, and its endpoints (already
normalized).  Search works on rules normalized to conclusion level 0; the
hypothesis judgments may still live at positive levels and are searched at
extended scopes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .equation import normalize
from .metaterm import (
    Assignment,
    MOp,
    MVar,
    eval_metaterm,
    match_metaterm_relaxed,
    metavars_of,
    occurs,
)
from .monad import SubstMap, subst
from .signature import ReductionRuleSpec, SignatureDoc, closure_pack, congruence_pack
from .terms import Op, Term, Var, term_size, well_scoped


@dataclass(frozen=True)
class Derivation:
    rule: str
    base: int  # scope of the assignment
    level: int  # scope extension of the judgment
    assignment: Assignment
    subs: tuple
    endpoints: tuple  # (source, target) at scope base + level

    @property
    def source(self):
        return self.endpoints[0]

    @property
    def target(self):
        return self.endpoints[1]


def endpoints(d: Derivation) -> tuple:
    return d.endpoints


def _nf(t: Term, doc: SignatureDoc, scope: int) -> Term:
    return normalize(t, doc, scope).result


def instantiate(doc: SignatureDoc, rule_name: str, a: Assignment,
                subs: tuple = ()) -> Derivation:
    """Build a derivation for a rule at a full assignment, computing endpoints."""
    info = doc.info().rule_info[rule_name]
    n, src, tgt = info.rule.conclusion
    scope = a.base + n
    return Derivation(
        rule=rule_name,
        base=a.base,
        level=n,
        assignment=a,
        subs=tuple(subs),
        endpoints=(
            _nf(eval_metaterm(src, a, doc, n), doc, scope),
            _nf(eval_metaterm(tgt, a, doc, n), doc, scope),
        ),
    )


def check(d: Derivation, doc: SignatureDoc) -> bool:
    """Recursively verify every invariant of a derivation tree."""
    try:
        info = doc.info().rule_info.get(d.rule)
        if info is None:
            return False
        rule = info.rule
        for decl in rule.metavars:
            if decl.name not in d.assignment:
                return False
            value = d.assignment.get(decl.name)
            if not isinstance(value, (Var, Op)):
                return False
            if not well_scoped(value, d.base + decl.level, doc):
                return False
            for slot in decl.uses_fresh:
                if not occurs(value, d.base + slot):
                    return False
        n, csrc, ctgt = rule.conclusion
        want = (
            _nf(eval_metaterm(csrc, d.assignment, doc, n), doc, d.base + n),
            _nf(eval_metaterm(ctgt, d.assignment, doc, n), doc, d.base + n),
        )
        if d.endpoints != want or d.level != n:
            return False
        if len(d.subs) != len(rule.hypotheses):
            return False
        for sub, (nh, hsrc, htgt) in zip(d.subs, rule.hypotheses):
            if sub.base + sub.level != d.base + nh:
                return False
            want_h = (
                _nf(eval_metaterm(hsrc, d.assignment, doc, nh), doc, d.base + nh),
                _nf(eval_metaterm(htgt, d.assignment, doc, nh), doc, d.base + nh),
            )
            if sub.endpoints != want_h:
                return False
            if not check(sub, doc):
                return False
        return True
    except Exception:
        return False


def subst_derivation(d: Derivation, f: SubstMap, doc: SignatureDoc) -> Derivation:
    """Substitute a derivation: images act on the assignment, recursively on subs."""
    info = doc.info().rule_info[d.rule]
    rule = info.rule
    values = {}
    for decl in rule.metavars:
        value = d.assignment.get(decl.name)
        values[decl.name] = subst(value, f.lift(decl.level, doc), doc)
    a = Assignment(f.codomain, values)
    subs = tuple(
        subst_derivation(sub, f.lift(nh, doc), doc)
        for sub, (nh, _, _) in zip(d.subs, rule.hypotheses)
    )
    return instantiate(doc, d.rule, a, subs)


def _monadic_only(doc: SignatureDoc, op: str) -> None:
    if doc.state is not None:
        from .signature import SigError

        raise SigError(
            f"{op} works on the term layer; stateful signatures reduce "
            "through het_step/het_derive (or pi_step)"
        )


def _splice(doc: SignatureDoc, with_congruence: bool,
            with_closure: bool = False) -> SignatureDoc:
    extra = []
    have = {r.name for r in doc.rules}
    if with_congruence:
        extra.extend(r for r in congruence_pack(doc) if r.name not in have)
    if with_closure:
        extra.extend(r for r in closure_pack() if r.name not in have)
    return doc.with_rules(extra) if extra else doc


def step(t: Term, doc: SignatureDoc, scope: int,
         with_congruence: bool = False, rules: list[str] | None = None,
         max_steps: int = 10**4) -> list[Derivation]:
    """All one-step derivations out of t, deterministically ordered.

    Rules with hypotheses are resolved by recursive stepping at strictly
    smaller subjects only, which makes the enumeration complete exactly for
    structurally decreasing rule sets (congruence packs).
    """
    _monadic_only(doc, "step")
    doc = _splice(doc, with_congruence)
    info = doc.info()
    t = _nf(t, doc, scope)
    selected = [
        r.name
        for r in doc.rules
        if (rules is None or r.name in rules) and info.rule_info[r.name].searchable
    ]
    budget = [max_steps]

    def one_step(t: Term, sc: int) -> list[Derivation]:
        out = []
        for name in selected:
            rinfo = info.rule_info[name]
            rule = rinfo.rule
            uses = {dcl.name: dcl.uses_fresh for dcl in rule.metavars}
            _, csrc, _ = rule.conclusion
            a = match_metaterm_relaxed(csrc, t, Assignment(sc), doc, 0, uses)
            if a is None:
                continue
            solutions = [(a, [])]
            for (nh, hsrc, htgt) in rule.hypotheses:
                next_solutions = []
                for (acc, subs) in solutions:
                    if not metavars_of(hsrc) <= set(acc.values):
                        continue
                    s_i = _nf(eval_metaterm(hsrc, acc, doc, nh), doc, sc + nh)
                    if term_size(s_i) >= term_size(t):
                        continue  # only structurally decreasing recursion
                    for sub_d in one_step(s_i, sc + nh):
                        a2 = match_metaterm_relaxed(
                            htgt, sub_d.target, acc, doc, nh, uses
                        )
                        if a2 is not None:
                            next_solutions.append((a2, subs + [sub_d]))
                solutions = next_solutions
            for (a_fin, subs) in solutions:
                if budget[0] <= 0:
                    return out
                budget[0] -= 1
                out.append(instantiate(doc, name, a_fin, tuple(subs)))
        return out

    return one_step(t, scope)


@dataclass
class DeriveResult:
    derivations: list
    exhausted: bool = False
    bindings: list = None  # per derivation, the goal pattern's metavariables

    def __post_init__(self):
        if self.bindings is None:
            self.bindings = [None] * len(self.derivations)


def derive(src: Term, tgt, doc: SignatureDoc, scope: int,
           depth: int = 32, max_steps: int = 10**4,
           with_congruence: bool = False, with_closure: bool = False) -> DeriveResult:
    """Goal-directed search: derivations from src whose target matches tgt.

    `tgt` is a metaterm pattern (its metavariables get bound) or a concrete
    Term.  Depth-first with a result memo on (term, goal, depth); budgets make
    divergence observable and are reported apart from an empty answer.
    """
    _monadic_only(doc, "derive")
    doc = _splice(doc, with_congruence, with_closure)
    info = doc.info()
    src = _nf(src, doc, scope)
    exhausted = [False]
    budget = [max_steps]
    selected = [r.name for r in doc.rules if info.rule_info[r.name].searchable]
    memo: dict = {}

    def match_goal(pat, t: Term, ctx: Assignment, level: int) -> Assignment | None:
        if isinstance(pat, (Var, Op)):
            return ctx if pat == t else None
        return match_metaterm_relaxed(pat, t, ctx, doc, level)

    def goal_key(pat, ctx: Assignment, level: int):
        if isinstance(pat, (Var, Op)):
            return ("term", pat, level)
        bound = tuple(
            sorted((k, repr(v)) for k, v in ctx.values.items()
                   if k in metavars_of(pat))
        )
        return ("pat", repr(pat), bound, ctx.base, level)

    def go(s: Term, pat, ctx: Assignment, level: int, sc: int, depth_left: int):
        """Solutions (derivation, extended goal context) from s into pat.

        Results are memoized as (derivation, delta) where the delta contains
        only the bindings the goal match adds, so they replay under any
        context agreeing on the pattern's already-bound metavariables.
        """
        key = (s, goal_key(pat, ctx, level), sc, depth_left)
        if key not in memo:
            solutions_out: list = []
            relevant = metavars_of(pat) if not isinstance(pat, (Var, Op)) else set()
            for name in selected:
                rinfo = info.rule_info[name]
                rule = rinfo.rule
                uses = {dcl.name: dcl.uses_fresh for dcl in rule.metavars}
                if budget[0] <= 0:
                    exhausted[0] = True
                    break
                budget[0] -= 1
                a0 = match_metaterm_relaxed(
                    rule.conclusion[1], s, Assignment(sc), doc, 0, uses
                )
                if a0 is None:
                    continue
                solutions = [(a0, [])]
                for (nh, hsrc, htgt) in rule.hypotheses:
                    if depth_left <= 0:
                        exhausted[0] = True
                        solutions = []
                        break
                    next_solutions = []
                    seen_outcomes = set()
                    for (acc, subs) in solutions:
                        s_i = _nf(eval_metaterm(hsrc, acc, doc, nh), doc, sc + nh)
                        for (sub_d, acc2) in go(
                            s_i, htgt, acc, nh, sc + nh, depth_left - 1
                        ):
                            # chains re-associate into many trees denoting one
                            # composite; keep one representative per outcome
                            outcome = (
                                tuple(sorted(
                                    (k, repr(v)) for k, v in acc2.values.items()
                                )),
                                sub_d.rule,
                                repr(sub_d.endpoints),
                            )
                            if outcome in seen_outcomes:
                                continue
                            seen_outcomes.add(outcome)
                            next_solutions.append((acc2, subs + [sub_d]))
                    solutions = next_solutions
                for (a_fin, subs) in solutions:
                    d = instantiate(doc, name, _restrict(a_fin, rule), tuple(subs))
                    extended = match_goal(pat, d.target, ctx, level)
                    if extended is None:
                        continue
                    delta = {
                        k: v for k, v in extended.values.items()
                        if k in relevant and k not in ctx
                    }
                    solutions_out.append((d, delta))
            memo[key] = solutions_out
        out = []
        for (d, delta) in memo[key]:
            extended = ctx
            for k, v in delta.items():
                extended = extended.extended(k, v)
            out.append((d, extended))
        return out

    def _restrict(a: Assignment, rule: ReductionRuleSpec) -> Assignment:
        names = {dcl.name for dcl in rule.metavars}
        return Assignment(a.base, {k: v for k, v in a.values.items() if k in names})

    found = go(src, tgt, Assignment(scope), 0, scope, depth)
    return DeriveResult(
        [d for (d, _) in found], exhausted[0], [a for (_, a) in found]
    )


@dataclass
class TraceResult:
    steps: list
    truncated: bool = False

    @property
    def final(self):
        return self.steps[-1].target if self.steps else None


def redex_path(d: Derivation, doc: SignatureDoc) -> tuple:
    """Position of the rewritten subterm, following congruence nestings."""
    info = doc.info().rule_info[d.rule]
    rule = info.rule
    if len(d.subs) != 1 or len(rule.hypotheses) != 1:
        return ()
    _, csrc, _ = rule.conclusion
    hyp_src = rule.hypotheses[0][1]
    if not (isinstance(csrc, MOp) and isinstance(hyp_src, MVar)):
        return ()
    for i, arg in enumerate(csrc.args):
        if isinstance(arg, MVar) and arg.name == hyp_src.name:
            return (i,) + redex_path(d.subs[0], doc)
    return ()


def trace(t: Term, doc: SignatureDoc, scope: int, max_steps: int = 100,
          strategy: str = "leftmost-outermost",
          with_congruence: bool = False, rules: list[str] | None = None) -> TraceResult:
    """Iterate step(), picking one derivation per step by the strategy.

    Rules whose conclusion source is a bare metavariable match every term and
    can never reach a normal form, so the strategies skip them.
    """
    doc = _splice(doc, with_congruence)
    info = doc.info()
    usable = [
        r.name
        for r in doc.rules
        if (rules is None or r.name in rules)
        and info.rule_info[r.name].searchable
        and not info.rule_info[r.name].always_applicable
    ]
    rule_index = {r.name: i for i, r in enumerate(doc.rules)}
    out: list[Derivation] = []
    current = _nf(t, doc, scope)
    for _ in range(max_steps):
        candidates = step(current, doc, scope, rules=usable)
        if not candidates:
            return TraceResult(out, truncated=False)
        if strategy == "enumerate-all":
            chosen = candidates[0]
        elif strategy in ("leftmost-outermost", "leftmost-innermost"):
            keyed = [
                (redex_path(d, doc), rule_index.get(d.rule, 0), i, d)
                for i, d in enumerate(candidates)
            ]
            if strategy == "leftmost-outermost":
                keyed.sort(key=lambda kv: (kv[0], kv[1], kv[2]))
            else:
                keyed.sort(key=lambda kv: (-len(kv[0]), kv[0], kv[1], kv[2]))
            chosen = keyed[0][3]
        else:
            raise ValueError(f"unknown strategy {strategy}")
        out.append(chosen)
        current = chosen.target
    truncated = bool(step(current, doc, scope, rules=usable))
    return TraceResult(out, truncated=truncated)


@dataclass
class Graph:
    nodes: list  # terms, in discovery order
    edges: list  # (src index, dst index, rule)
    exhausted: bool = False


def reduction_graph(seeds: list[Term], doc: SignatureDoc, scope: int,
                    max_nodes: int = 200, max_edges: int = 1000,
                    with_congruence: bool = False,
                    rules: list[str] | None = None) -> Graph:
    """Breadth-first reduction graph from the seeds, bounded and deterministic."""
    doc = _splice(doc, with_congruence)
    info = doc.info()
    if rules is None:
        rules = [
            r.name for r in doc.rules
            if info.rule_info[r.name].searchable
            and not info.rule_info[r.name].always_applicable
        ]
    nodes: list[Term] = []
    index: dict = {}
    edges: list[tuple[int, int, str]] = []
    seen_edges: set = set()
    exhausted = False
    queue: list[Term] = []
    for s in seeds:
        s = _nf(s, doc, scope)
        if s not in index:
            index[s] = len(nodes)
            nodes.append(s)
            queue.append(s)
    while queue:
        current = queue.pop(0)
        for d in step(current, doc, scope, rules=rules):
            tgt = d.target
            if tgt not in index:
                if len(nodes) >= max_nodes:
                    exhausted = True
                    continue
                index[tgt] = len(nodes)
                nodes.append(tgt)
                queue.append(tgt)
            e = (index[current], index[tgt], d.rule)
            if e in seen_edges:
                continue
            if len(edges) >= max_edges:
                exhausted = True
                break
            seen_edges.add(e)
            edges.append(e)
    return Graph(nodes=nodes, edges=edges, exhausted=exhausted)
