"""Heterogeneous reductions: state-functor terms over the monad of a signature.

State terms are trees over the declared state operations; base slots hold
channel variables, term slots hold monad terms, state slots recurse.  The
embedding declared by a state functor (the initial morphism, e.g. splitting a
lambda term into a binary tree of values) connects the two layers.  The
heterogeneous step/derive/trace mirror the reduction module; the pi-calculus
structural congruence is realized as a canonical form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .equation import normalize
from .metaterm import (
    Assignment,
    Fresh,
    MVar,
    SEmbed,
    SOp,
    eval_metaterm,
    match_metaterm_relaxed,
    metavars_of,
)
from .monad import SubstMap, subst
from .reduction import Derivation
from .signature import SigError, SignatureDoc, StateFunctorSpec
from .terms import Op, Term, Var, term_compare, term_size, well_scoped


@dataclass(frozen=True, slots=True)
class StateNode:
    name: str
    args: tuple

    def __repr__(self) -> str:
        inner = ", ".join(repr(a) for a in self.args)
        return f"StateNode({self.name!r}, ({inner}))"


StateTerm = StateNode


def _functor(doc: SignatureDoc, side: str) -> StateFunctorSpec:
    if doc.state is None:
        raise SigError("signature has no state functors")
    return doc.state[0 if side in ("state1", "T1") else 1]


def make_state(doc: SignatureDoc, side: str, name: str, args) -> StateNode:
    functor = _functor(doc, side)
    spec = functor.op(name)
    args = tuple(args)
    if len(args) != len(spec.slots):
        raise SigError(f"state op {name} expects {len(spec.slots)} slots")
    for a, slot in zip(args, spec.slots):
        if slot.kind == "base" and not isinstance(a, Var):
            raise SigError(f"base slot of {name} needs a variable")
        if slot.kind == "term" and not isinstance(a, (Var, Op)):
            raise SigError(f"term slot of {name} needs a monad term")
        if slot.kind == "state" and not isinstance(a, StateNode):
            raise SigError(f"state slot of {name} needs a state term")
    return StateNode(name, args)


def state_well_scoped(s: StateTerm, n: int, doc: SignatureDoc, side: str) -> bool:
    functor = _functor(doc, side)
    match s:
        case StateNode(name, args):
            spec = functor.ops_by_name.get(name)
            if spec is None or len(args) != len(spec.slots):
                return False
            for a, slot in zip(args, spec.slots):
                if slot.kind == "base":
                    if not (isinstance(a, Var) and a.index < n):
                        return False
                elif slot.kind == "term":
                    if not well_scoped(a, n + slot.level, doc):
                        return False
                else:
                    if not state_well_scoped(a, n + slot.level, doc, side):
                        return False
            return True
    return False


def state_size(s) -> int:
    match s:
        case StateNode(_, args):
            return 1 + sum(state_size(a) for a in args)
        case Var(_) | Op(_, _):
            return term_size(s)
    raise SigError(f"not a state term: {s!r}")


def term_weight(s) -> int:
    """Total size of the monad terms embedded in a state term.

    Hypothesis recursion uses (term_weight, state_size) as its decreasing
    measure: splitting a term into a state tree keeps the node count but
    strictly drops the embedded weight.
    """
    match s:
        case StateNode(_, args):
            return sum(term_weight(a) for a in args)
        case Op(_, _):
            return term_size(s)
        case Var(_):
            return 1
    raise SigError(f"not a state term: {s!r}")


def state_compare(s, t) -> int:
    """Total order extending term_compare; monad terms sort before state nodes."""
    s_state = isinstance(s, StateNode)
    t_state = isinstance(t, StateNode)
    if not s_state and not t_state:
        return term_compare(s, t)
    if s_state != t_state:
        return 1 if s_state else -1
    if s.name != t.name:
        return -1 if s.name < t.name else 1
    for a, b in zip(s.args, t.args):
        c = state_compare(a, b)
        if c != 0:
            return c
    return (len(s.args) > len(t.args)) - (len(s.args) < len(t.args))


def state_subst(s: StateTerm, f: SubstMap, doc: SignatureDoc, side: str) -> StateTerm:
    """Substitute inside term slots; base slots accept variable images only."""
    functor = _functor(doc, side)
    match s:
        case StateNode(name, args):
            spec = functor.op(name)
            out = []
            for a, slot in zip(args, spec.slots):
                if slot.kind == "base":
                    image = f(a.index)
                    if not isinstance(image, Var):
                        raise SigError(
                            f"base slot of {name} substituted by a non-variable"
                        )
                    out.append(image)
                elif slot.kind == "term":
                    out.append(subst(a, f.lift(slot.level, doc), doc))
                else:
                    out.append(
                        state_subst(a, f.lift(slot.level, doc), doc, side)
                    )
            return StateNode(name, tuple(out))
    raise SigError(f"not a state term: {s!r}")


# ---------------------------------------------------------------------------
# Embeddings (the initial morphism into a state functor)

def embed_term(doc: SignatureDoc, side: str, name: str, t: Term) -> StateTerm:
    functor = _functor(doc, side)
    emb = functor.embeds_by_name.get(name)
    if emb is None:
        raise SigError(f"state functor {functor.name} has no embedding {name}")

    def go(t: Term) -> StateTerm:
        match t:
            case Op(op, args) if op == emb.split_op:
                return StateNode(emb.node_op, tuple(go(a) for a in args))
            case _:
                return StateNode(emb.leaf_op, (t,))

    return go(t)


def compose_embed(doc: SignatureDoc, side: str, name: str, s: StateTerm) -> Term:
    functor = _functor(doc, side)
    emb = functor.embeds_by_name.get(name)
    if emb is None:
        raise SigError(f"state functor {functor.name} has no embedding {name}")
    from .terms import make_op

    def go(s: StateTerm) -> Term:
        match s:
            case StateNode(op, args) if op == emb.node_op:
                return make_op(doc, emb.split_op, [go(a) for a in args])
            case StateNode(op, (leaf,)) if op == emb.leaf_op:
                return leaf
        raise SigError(f"state term outside the image of {name}: {s!r}")

    return go(s)


def cbv_decompose(t: Term, doc: SignatureDoc) -> StateTerm:
    """Split a lambda term at applications into a tree with value leaves."""
    return embed_term(doc, "state1", "j", t)


def cbv_compose(s: StateTerm, doc: SignatureDoc) -> Term:
    return compose_embed(doc, "state1", "j", s)


# ---------------------------------------------------------------------------
# Evaluation and matching of state metaterms

def eval_state(mt, a: Assignment, doc: SignatureDoc, side: str, level: int):
    functor = _functor(doc, side)
    match mt:
        case SOp(name, args):
            spec = functor.op(name)
            out = []
            for arg, slot in zip(args, spec.slots):
                if slot.kind == "base":
                    v = eval_metaterm(arg, a, doc, level)
                    if not isinstance(v, Var):
                        raise SigError(f"channel slot of {name} needs a variable")
                    out.append(v)
                elif slot.kind == "term":
                    out.append(eval_metaterm(arg, a, doc, level + slot.level))
                else:
                    out.append(eval_state(arg, a, doc, side, level + slot.level))
            return StateNode(name, tuple(out))
        case SEmbed(name, arg):
            return embed_term(doc, side, name, eval_metaterm(arg, a, doc, level))
        case MVar(name, subs):
            value = a.get(name)
            if not isinstance(value, StateNode):
                raise SigError(f"metavariable {name} is not state-valued")
            x = a.base
            m = len(subs)
            images = tuple(Var(i) for i in range(x)) + tuple(
                eval_metaterm(sub, a, doc, level) for sub in subs
            )
            return state_subst(value, SubstMap(x + m, x + level, images), doc, side)
    raise SigError(f"not a state metaterm: {mt!r}")


def _state_retract(s: StateTerm, x: int, level: int, slots: list[int],
                   doc: SignatureDoc, side: str):
    """Retract s : State@(x+level) onto x+len(slots); None when out of image."""
    functor = _functor(doc, side)
    table = {x + sl: x + k for k, sl in enumerate(slots)}

    def var(v: Var, extra: int):
        i = v.index
        if i < x:
            return v
        if i >= x + level:
            if i < x + level + extra:
                return Var(i - level + len(slots))
            raise SigError("variable out of scope")
        j = table.get(i)
        return None if j is None else Var(j)

    def go(s, extra: int):
        match s:
            case StateNode(name, args):
                spec = functor.op(name)
                out = []
                for a, slot in zip(args, spec.slots):
                    if slot.kind == "base":
                        v = var(a, extra)
                        if v is None:
                            return None
                        out.append(v)
                    elif slot.kind == "term":
                        v = _term_retract(a, x, level, slots, extra + slot.level, doc)
                        if v is None:
                            return None
                        out.append(v)
                    else:
                        v = go(a, extra + slot.level)
                        if v is None:
                            return None
                        out.append(v)
                return StateNode(name, tuple(out))
        raise SigError(f"not a state term: {s!r}")

    return go(s, 0)


def _term_retract(t: Term, x: int, level: int, slots: list[int], extra: int,
                  doc: SignatureDoc):
    from .terms import arg_binders, make_op

    table = {x + sl: x + k for k, sl in enumerate(slots)}

    def go(t: Term, extra: int):
        match t:
            case Var(i):
                if i < x:
                    return t
                if i >= x + level:
                    if i < x + level + extra:
                        return Var(i - level + len(slots))
                    raise SigError("variable out of scope")
                j = table.get(i)
                return None if j is None else Var(j)
            case Op(name, args):
                spec = doc.op(name)
                out = []
                for a, k in zip(args, arg_binders(spec, args)):
                    v = go(a, extra + k)
                    if v is None:
                        return None
                    out.append(v)
                return make_op(doc, name, out)
        raise SigError(f"not a term: {t!r}")

    return go(t, extra)


def match_state(p, s, partial: Assignment, doc: SignatureDoc, side: str,
                level: int, uses_fresh: dict | None = None) -> Assignment | None:
    functor = _functor(doc, side)
    uses_fresh = uses_fresh or {}

    def go(p, s, level: int, a: Assignment) -> Assignment | None:
        x = a.base
        match p:
            case SOp(name, pargs):
                if not (isinstance(s, StateNode) and s.name == name):
                    return None
                spec = functor.op(name)
                for parg, sarg, slot in zip(pargs, s.args, spec.slots):
                    if slot.kind == "base":
                        a = match_metaterm_relaxed(
                            parg, sarg, a, doc, level, uses_fresh
                        )
                    elif slot.kind == "term":
                        a = match_metaterm_relaxed(
                            parg, sarg, a, doc, level + slot.level, uses_fresh
                        )
                    else:
                        a = go(parg, sarg, level + slot.level, a)
                    if a is None:
                        return None
                return a
            case SEmbed(name, parg):
                try:
                    t = compose_embed(doc, side, name, s)
                except SigError:
                    return None
                return match_metaterm_relaxed(parg, t, a, doc, level, uses_fresh)
            case MVar(name, subs):
                if not all(isinstance(sub, Fresh) for sub in subs):
                    raise SigError(f"state metavariable {p!r} is not in pattern form")
                if not isinstance(s, StateNode):
                    return None
                slots = [sub.index for sub in subs]
                value = _state_retract(s, x, level, slots, doc, side)
                if value is None:
                    return None
                if name in a:
                    return a if a.get(name) == value else None
                return a.extended(name, value)
        raise SigError(f"not a state pattern: {p!r}")

    return go(p, s, level, partial)


# ---------------------------------------------------------------------------
# Normalization of state terms

def state_normalize(s: StateTerm, doc: SignatureDoc, side: str, scope: int) -> StateTerm:
    """Normalize term slots modulo the doc's equations; apply the state hook."""
    functor = _functor(doc, side)

    def go(s, sc: int):
        match s:
            case StateNode(name, args):
                spec = functor.op(name)
                out = []
                for a, slot in zip(args, spec.slots):
                    if slot.kind == "base":
                        out.append(a)
                    elif slot.kind == "term":
                        out.append(normalize(a, doc, sc + slot.level).result)
                    else:
                        out.append(go(a, sc + slot.level))
                return StateNode(name, tuple(out))
        raise SigError(f"not a state term: {s!r}")

    s = go(s, scope)
    if doc.state_canonicalizer == "pi-struct":
        s = pi_canonical(s, doc, scope, side=side)
    return s


# ---------------------------------------------------------------------------
# Heterogeneous derivations

def het_instantiate(doc: SignatureDoc, rule_name: str, a: Assignment,
                    subs: tuple = ()) -> Derivation:
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
            state_normalize(eval_state(src, a, doc, "state1", n), doc, "state1", scope),
            state_normalize(eval_state(tgt, a, doc, "state2", n), doc, "state2", scope),
        ),
    )


def het_check(d: Derivation, doc: SignatureDoc) -> bool:
    try:
        info = doc.info().rule_info.get(d.rule)
        if info is None:
            return False
        rule = info.rule
        for decl in rule.metavars:
            if decl.name not in d.assignment:
                return False
            value = d.assignment.get(decl.name)
            sort = info.sorts.get(decl.name, ("term", decl.level))
            if sort[0] == "term":
                if not well_scoped(value, d.base + decl.level, doc):
                    return False
            else:
                side = "state1" if sort[0] == "state1" else "state2"
                if not state_well_scoped(value, d.base + decl.level, doc, side):
                    return False
        n, csrc, ctgt = rule.conclusion
        want = (
            state_normalize(eval_state(csrc, d.assignment, doc, "state1", n),
                            doc, "state1", d.base + n),
            state_normalize(eval_state(ctgt, d.assignment, doc, "state2", n),
                            doc, "state2", d.base + n),
        )
        if d.endpoints != want:
            return False
        if len(d.subs) != len(rule.hypotheses):
            return False
        for sub, (nh, hsrc, htgt) in zip(d.subs, rule.hypotheses):
            want_h = (
                state_normalize(eval_state(hsrc, d.assignment, doc, "state1", nh),
                                doc, "state1", d.base + nh),
                state_normalize(eval_state(htgt, d.assignment, doc, "state2", nh),
                                doc, "state2", d.base + nh),
            )
            if sub.endpoints != want_h:
                return False
            if not het_check(sub, doc):
                return False
        return True
    except Exception:
        return False


def het_subst_derivation(d: Derivation, f: SubstMap, doc: SignatureDoc) -> Derivation:
    info = doc.info().rule_info[d.rule]
    rule = info.rule
    values = {}
    for decl in rule.metavars:
        value = d.assignment.get(decl.name)
        sort = info.sorts.get(decl.name, ("term", decl.level))
        lifted = f.lift(decl.level, doc)
        if sort[0] == "term":
            values[decl.name] = subst(value, lifted, doc)
        else:
            side = "state1" if sort[0] == "state1" else "state2"
            values[decl.name] = state_subst(value, lifted, doc, side)
    a = Assignment(f.codomain, values)
    subs = tuple(
        het_subst_derivation(sub, f.lift(nh, doc), doc)
        for sub, (nh, _, _) in zip(d.subs, rule.hypotheses)
    )
    return het_instantiate(doc, d.rule, a, subs)


def het_step(s: StateTerm, doc: SignatureDoc, scope: int,
             rules: list[str] | None = None,
             max_steps: int = 10**4) -> list[Derivation]:
    """One-step heterogeneous derivations out of s (conclusion sources match s)."""
    info = doc.info()
    s = state_normalize(s, doc, "state1", scope)
    selected = [
        r.name
        for r in doc.rules
        if (rules is None or r.name in rules) and info.rule_info[r.name].searchable
    ]
    budget = [max_steps]

    def one_step(s, sc: int) -> list[Derivation]:
        out = []
        for name in selected:
            rule = info.rule_info[name].rule
            uses = {dcl.name: dcl.uses_fresh for dcl in rule.metavars}
            a = match_state(rule.conclusion[1], s, Assignment(sc), doc, "state1", 0, uses)
            if a is None:
                continue
            solutions = [(a, [])]
            for (nh, hsrc, htgt) in rule.hypotheses:
                next_solutions = []
                for (acc, subs) in solutions:
                    if not metavars_of(hsrc) <= set(acc.values):
                        continue
                    s_i = state_normalize(
                        eval_state(hsrc, acc, doc, "state1", nh),
                        doc, "state1", sc + nh,
                    )
                    if (term_weight(s_i), state_size(s_i)) >= (
                        term_weight(s), state_size(s)
                    ):
                        continue
                    for sub_d in one_step(s_i, sc + nh):
                        a2 = match_state(
                            htgt, sub_d.target, acc, doc, "state2", nh, uses
                        )
                        if a2 is not None:
                            next_solutions.append((a2, subs + [sub_d]))
                solutions = next_solutions
            for (a_fin, subs) in solutions:
                if budget[0] <= 0:
                    return out
                budget[0] -= 1
                out.append(het_instantiate(doc, name, a_fin, tuple(subs)))
        return out

    return one_step(s, scope)


@dataclass
class HetDeriveResult:
    derivations: list
    exhausted: bool = False
    bindings: list = None  # per derivation, the goal pattern's metavariables

    def __post_init__(self):
        if self.bindings is None:
            self.bindings = [None] * len(self.derivations)


def het_derive(s: StateTerm, tgt, doc: SignatureDoc, scope: int,
               depth: int = 32, max_steps: int = 10**4) -> HetDeriveResult:
    """Goal-directed heterogeneous search (big-step evaluation lives here)."""
    info = doc.info()
    s = state_normalize(s, doc, "state1", scope)
    exhausted = [False]
    budget = [max_steps]
    selected = [r.name for r in doc.rules if info.rule_info[r.name].searchable]
    memo: dict = {}

    def match_goal(pat, t, ctx: Assignment, level: int) -> Assignment | None:
        if isinstance(pat, StateNode):
            return ctx if pat == t else None
        return match_state(pat, t, ctx, doc, "state2", level)

    def goal_key(pat, ctx: Assignment, level: int):
        if isinstance(pat, StateNode):
            return ("state", pat, level)
        bound = tuple(
            sorted((k, repr(v)) for k, v in ctx.values.items()
                   if k in metavars_of(pat))
        )
        return ("pat", repr(pat), bound, ctx.base, level)

    def go(s, pat, ctx: Assignment, level: int, sc: int, depth_left: int):
        key = (s, goal_key(pat, ctx, level), sc, depth_left)
        if key not in memo:
            solutions_out: list = []
            relevant = metavars_of(pat) if not isinstance(pat, StateNode) else set()
            for name in selected:
                rule = info.rule_info[name].rule
                uses = {dcl.name: dcl.uses_fresh for dcl in rule.metavars}
                if budget[0] <= 0:
                    exhausted[0] = True
                    break
                budget[0] -= 1
                a0 = match_state(
                    rule.conclusion[1], s, Assignment(sc), doc, "state1", 0, uses
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
                    for (acc, subs) in solutions:
                        s_i = state_normalize(
                            eval_state(hsrc, acc, doc, "state1", nh),
                            doc, "state1", sc + nh,
                        )
                        for (sub_d, acc2) in go(
                            s_i, htgt, acc, nh, sc + nh, depth_left - 1
                        ):
                            next_solutions.append((acc2, subs + [sub_d]))
                    solutions = next_solutions
                for (a_fin, subs) in solutions:
                    names = {dcl.name for dcl in rule.metavars}
                    restricted = Assignment(
                        a_fin.base,
                        {k: v for k, v in a_fin.values.items() if k in names},
                    )
                    d = het_instantiate(doc, name, restricted, tuple(subs))
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

    found = go(s, tgt, Assignment(scope), 0, scope, depth)
    return HetDeriveResult(
        [d for (d, _) in found], exhausted[0], [a for (_, a) in found]
    )


@dataclass
class HetTraceResult:
    steps: list
    truncated: bool = False

    @property
    def final(self):
        return self.steps[-1].target if self.steps else None


def het_trace(s: StateTerm, doc: SignatureDoc, scope: int,
              max_steps: int = 100) -> HetTraceResult:
    """Iterated small-step: first derivation each round until none applies.

    Signatures carrying the pi-struct canonicalizer are stepped through the
    communication rule on canonical forms.
    """
    stepper = pi_step if doc.state_canonicalizer == "pi-struct" else het_step
    out: list[Derivation] = []
    current = state_normalize(s, doc, "state1", scope)
    for _ in range(max_steps):
        ds = stepper(current, doc, scope)
        if not ds:
            return HetTraceResult(out, truncated=False)
        out.append(ds[0])
        current = ds[0].target
    return HetTraceResult(out, truncated=bool(stepper(current, doc, scope)))


# ---------------------------------------------------------------------------
# The pi-calculus structural congruence, as a canonical form

def pi_canonical(s: StateTerm, doc: SignatureDoc, scope: int,
                 side: str = "state1") -> StateTerm:
    """Canonical form: prenex restrictions, flattened sorted parallel multiset,
    dropped nil components; deterministic and permutation-invariant."""
    for _ in range(64):
        s2 = _pi_pass(s, doc, scope, side)
        if s2 == s:
            return s
        s = s2
    return s


def _pi_pass(s: StateTerm, doc: SignatureDoc, scope: int, side: str) -> StateTerm:
    functor = _functor(doc, side)

    def canon(s, sc: int) -> StateTerm:
        match s:
            case StateNode("out", (a, b, p)):
                return StateNode("out", (a, b, canon(p, sc)))
            case StateNode("in", (a, p)):
                return StateNode("in", (a, canon(p, sc + 1)))
            case StateNode("bang", (p,)):
                return StateNode("bang", (canon(p, sc),))
            case StateNode("zero", ()):
                return s
            case StateNode("par" | "nu", _):
                return _canon_group(s, sc)
        raise SigError(f"not a pi term: {s!r}")

    def _canon_group(s, sc: int) -> StateTerm:
        # pull every restriction to a prenex block, flattening parallel
        # composition along the way
        k = 0
        comps: list[StateTerm] = []
        work = [(s, 0)]  # (component, how many binders it still must enter)
        while work:
            (c, lift_by) = work.pop(0)
            if lift_by:
                c = _state_weaken(c, lift_by, sc + k - lift_by, doc, side)
            match c:
                case StateNode("par", (l, r)):
                    work.insert(0, (r, 0))
                    work.insert(0, (l, 0))
                case StateNode("zero", ()):
                    pass
                case StateNode("nu", (body,)):
                    # the new binder outranks everything collected so far
                    comps = [
                        _state_weaken(x, 1, sc + k, doc, side) for x in comps
                    ]
                    work = [
                        (w, lb + 1) for (w, lb) in work
                    ]
                    k += 1
                    work.insert(0, (body, 0))
                case _:
                    comps.append(canon(c, sc + k))
        comps = _sorted_components(comps)
        comps, k = _canonical_binders(comps, k, sc, doc, side)
        body = _par_fold(comps)
        for _ in range(k):
            body = StateNode("nu", (body,))
        return body

    return canon(s, scope)


def _state_weaken(s: StateTerm, k: int, n: int, doc: SignatureDoc,
                  side: str) -> StateTerm:
    if k == 0:
        return s
    f = SubstMap(n, n + k, tuple(Var(i) for i in range(n)))
    return state_subst(s, f, doc, side)


def _sorted_components(comps: list[StateTerm]) -> list[StateTerm]:
    import functools

    return sorted(comps, key=functools.cmp_to_key(state_compare))


def _par_fold(comps: list[StateTerm]) -> StateTerm:
    if not comps:
        return StateNode("zero", ())
    out = comps[-1]
    for c in reversed(comps[:-1]):
        out = StateNode("par", (c, out))
    return out


def _canonical_binders(comps, k: int, sc: int, doc: SignatureDoc, side: str):
    """Choose the canonical order of the k prenex binders.

    All permutations are tried (the block is small at desk scale) and the
    least renamed-and-sorted body wins; this realizes the first-use ordering
    deterministically and permutation-invariantly.
    """
    if k <= 1 or k > 6:
        return comps, k
    import functools

    best = None
    for perm in itertools.permutations(range(k)):
        table = list(range(sc)) + [sc + perm[j] for j in range(k)]
        renamed = [
            _state_rename(c, table, sc + k, doc, side) for c in comps
        ]
        renamed = _sorted_components(renamed)
        key = tuple(renamed)
        if best is None or _components_less(renamed, best):
            best = renamed
    return list(best), k


def _components_less(a: list[StateTerm], b: list[StateTerm]) -> bool:
    for x, y in zip(a, b):
        c = state_compare(x, y)
        if c != 0:
            return c < 0
    return len(a) < len(b)


def _state_rename(s: StateTerm, table: list[int], n: int, doc: SignatureDoc,
                  side: str) -> StateTerm:
    f = SubstMap(n, n, tuple(Var(j) for j in table))
    return state_subst(s, f, doc, side)


def pi_step(s: StateTerm, doc: SignatureDoc, scope: int,
            budget: int = 2) -> list[Derivation]:
    """Apply the communication rule on the canonical form.

    The sorted parallel multiset is scanned as ordered pairs; replication is
    handled by bounded unfolding (a !P component may contribute up to `budget`
    copies), so sources of unfolding-derived steps are congruent to s rather
    than syntactically equal.
    """
    s = pi_canonical(s, doc, scope)
    return _pi_step_canonical(s, doc, scope, budget)


def _pi_step_canonical(s, doc, scope, budget) -> list[Derivation]:
    k, comps = _split_prenex(s)
    sc = scope + k
    out: list[Derivation] = []
    out.extend(_comm_steps(comps, doc, sc))
    if budget > 0:
        for i, c in enumerate(comps):
            if isinstance(c, StateNode) and c.name == "bang":
                unfolded = comps[:i] + [c.args[0], c] + comps[i + 1:]
                body = _par_fold(_sorted_components(unfolded))
                for d in _pi_step_canonical(body, doc, sc, budget - 1):
                    if d not in out:
                        out.append(d)
    for _ in range(k):
        sc -= 1
        out = [_wrap_nu(d, doc, sc) for d in out]
    return out


def _split_prenex(s) -> tuple[int, list]:
    k = 0
    while isinstance(s, StateNode) and s.name == "nu":
        s = s.args[0]
        k += 1
    comps = []
    stack = [s]
    while stack:
        c = stack.pop(0)
        if isinstance(c, StateNode) and c.name == "par":
            stack.insert(0, c.args[1])
            stack.insert(0, c.args[0])
        elif isinstance(c, StateNode) and c.name == "zero":
            pass
        else:
            comps.append(c)
    return k, comps


def _comm_steps(comps: list, doc: SignatureDoc, sc: int) -> list[Derivation]:
    out = []
    for i, ci in enumerate(comps):
        for j, cj in enumerate(comps):
            if i == j:
                continue
            match ci, cj:
                case StateNode("out", (a, b, p)), StateNode("in", (a2, q)):
                    if a != a2:
                        continue
                case _:
                    continue
            inner = het_instantiate(
                doc, "comm",
                Assignment(sc, {"A": a, "B": b, "P": p, "Q": q}),
            )
            rest = [c for idx, c in enumerate(comps) if idx not in (i, j)]
            if rest:
                d = het_instantiate(
                    doc, "par-cong",
                    Assignment(sc, {
                        "P": inner.source,
                        "Q": inner.target,
                        "R": _par_fold(_sorted_components(rest)),
                    }),
                    (inner,),
                )
            else:
                d = inner
            if d not in out:
                out.append(d)
    return out


def _wrap_nu(d: Derivation, doc: SignatureDoc, sc: int) -> Derivation:
    return het_instantiate(
        doc, "nu-cong",
        Assignment(sc, {"P": d.source, "Q": d.target}),
        (d,),
    )


# ---------------------------------------------------------------------------
# Concrete syntax for state terms

def print_state(s: StateTerm, doc: SignatureDoc, side: str,
                names: list[str] | None = None) -> str:
    functor = _functor(doc, side)
    from .terms import print_term

    names = list(names or [])
    taken = set(names)

    def fresh_name(pos: int) -> str:
        cand = f"c{pos}"
        while cand in taken:
            cand += "_"
        return cand

    def go(s, env: list[str]) -> str:
        match s:
            case StateNode(name, args):
                spec = functor.op(name)
                parts = []
                for a, slot in zip(args, spec.slots):
                    if slot.kind == "base":
                        parts.append(env[a.index])
                    elif slot.kind == "term":
                        binders = [fresh_name(len(env) + x) for x in range(slot.level)]
                        taken.update(binders)
                        inner = print_term(a, doc, env + binders)
                        parts.append(
                            (" ".join(binders) + ". " if binders else "") + inner
                        )
                    else:
                        binders = [fresh_name(len(env) + x) for x in range(slot.level)]
                        taken.update(binders)
                        inner = go(a, env + binders)
                        parts.append(
                            (" ".join(binders) + ". " if binders else "") + inner
                        )
                return f"{name}({', '.join(parts)})"
        raise SigError(f"not a state term: {s!r}")

    return go(s, names)


def parse_state(text: str, n: int, doc: SignatureDoc, side: str,
                names: list[str] | None = None) -> StateTerm:
    from .terms import IDENT, _Tokens, _parse

    functor = _functor(doc, side)
    names = list(names if names is not None else [f"c{i}" for i in range(n)])
    if len(names) != n:
        raise SigError(f"scope declares {n} variables but {len(names)} names given")
    toks = _Tokens(text)

    def parse_node(env: list[str]) -> StateTerm:
        head = toks.next()
        spec = functor.ops_by_name.get(head)
        if spec is None:
            raise SigError(f"unknown state operation {head!r}")
        toks.expect("(")
        args = []
        if toks.peek() == ")":
            toks.next()
        else:
            while True:
                if len(args) >= len(spec.slots):
                    raise SigError(f"too many slots for {head}")
                slot = spec.slots[len(args)]
                if slot.kind == "base":
                    name = toks.next()
                    if not IDENT.match(name):
                        raise SigError(f"expected channel name, got {name!r}")
                    args.append(Var(_lookup(env, name)))
                else:
                    binders = []
                    for _ in range(slot.level):
                        binders.append(toks.next())
                    if binders:
                        toks.expect(".")
                    if slot.kind == "term":
                        args.append(_parse(toks, env + binders, doc))
                    else:
                        args.append(parse_node(env + binders))
                if toks.peek() == ",":
                    toks.next()
                    continue
                toks.expect(")")
                break
        return make_state(doc, side, head, args)

    def _lookup(env: list[str], name: str) -> int:
        for i in range(len(env) - 1, -1, -1):
            if env[i] == name:
                return i
        raise SigError(f"unbound channel {name}")

    out = parse_node(names)
    if not toks.done():
        raise SigError(f"trailing input after state term: {toks.peek()!r}")
    return out
