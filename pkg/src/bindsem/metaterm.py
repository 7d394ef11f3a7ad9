"""Term schemas over metavariables, their evaluation, and pattern matching.

A metaterm at level n may mention the fresh slots *0..*(n-1), operations of
the signature, and declared metavariables.  A metavariable M of level m always
occurs as M[e0,...,e_{m-1}]: the metavariable with each of its m fresh slots
substituted.  State-layer nodes (SOp, SEmbed) are carried here so signatures
can be parsed uniformly; their evaluation lives in the operational module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .monad import SubstMap, subst
from .terms import Op, Term, Var, arg_binders, make_op


class MatchError(Exception):
    """Malformed matching inputs (not a pattern, scope mismatch)."""


@dataclass(frozen=True, slots=True)
class Fresh:
    index: int


@dataclass(frozen=True, slots=True)
class MOp:
    name: str
    args: tuple


@dataclass(frozen=True, slots=True)
class MVar:
    name: str
    subs: tuple = ()


@dataclass(frozen=True, slots=True)
class SOp:
    """State-functor operation node (operational layer)."""

    name: str
    args: tuple


@dataclass(frozen=True, slots=True)
class SEmbed:
    """Embedding of a monad metaterm into the state layer (the initial morphism)."""

    name: str
    arg: object


MetaTerm = Fresh | MOp | MVar
StateMetaTerm = SOp | SEmbed | MVar


@dataclass(frozen=True)
class Assignment:
    """Maps metavariable names to terms over base scope + their declared level."""

    base: int
    values: dict = field(default_factory=dict)

    def get(self, name: str):
        if name not in self.values:
            raise MatchError(f"missing metavariable {name}")
        return self.values[name]

    def extended(self, name: str, value) -> "Assignment":
        new = dict(self.values)
        new[name] = value
        return Assignment(self.base, new)

    def __contains__(self, name: str) -> bool:
        return name in self.values


def metavars_of(mt) -> set[str]:
    match mt:
        case Fresh(_):
            return set()
        case MVar(name, subs):
            out = {name}
            for s in subs:
                out |= metavars_of(s)
            return out
        case MOp(_, args) | SOp(_, args):
            out = set()
            for a in args:
                out |= metavars_of(a)
            return out
        case SEmbed(_, arg):
            return metavars_of(arg)
    raise MatchError(f"not a metaterm: {mt!r}")


def eval_metaterm(mt: MetaTerm, a: Assignment, doc, level: int) -> Term:
    """Instantiate mt at level `level` under the assignment: a Term@(base+level)."""
    x = a.base
    match mt:
        case Fresh(i):
            if i >= level:
                raise MatchError(f"fresh slot {i} above level {level}")
            return Var(x + i)
        case MOp(name, args):
            spec = doc.op(name)
            ks = arg_binders(spec, args)
            return make_op(
                doc,
                name,
                [eval_metaterm(arg, a, doc, level + k) for arg, k in zip(args, ks)],
            )
        case MVar(name, subs):
            body = a.get(name)
            m = len(subs)
            images = tuple(Var(i) for i in range(x)) + tuple(
                eval_metaterm(s, a, doc, level) for s in subs
            )
            return subst(body, SubstMap(x + m, x + level, images), doc)
    raise MatchError(f"not a monad metaterm: {mt!r}")


def is_pattern(mt) -> bool:
    """Linear Miller pattern: MVar subs are distinct fresh slots, no metavariable repeats."""
    seen: set[str] = set()

    def go(mt) -> bool:
        match mt:
            case Fresh(_):
                return True
            case MVar(name, subs):
                if name in seen:
                    return False
                seen.add(name)
                slots = [s.index for s in subs if isinstance(s, Fresh)]
                return len(slots) == len(subs) and len(set(slots)) == len(slots)
            case MOp(_, args) | SOp(_, args):
                return all(go(a) for a in args)
            case SEmbed(_, arg):
                return go(arg)
        return False

    return go(mt)


def occurs(t: Term, index: int) -> bool:
    match t:
        case Var(i):
            return i == index
        case Op(_, args):
            return any(occurs(a, index) for a in args)
    raise MatchError(f"not a term: {t!r}")


def match_pattern(
    p: MetaTerm,
    t: Term,
    partial: Assignment,
    doc,
    level: int,
    uses_fresh: dict | None = None,
) -> Assignment | None:
    """Match pattern p against t : Term@(base+level); None on failure.

    An MVar occurrence M[*s0,...,*s_{m-1}] binds M to t retracted onto
    base+m; the retraction fails (occurs-check) when t mentions a fresh
    variable outside the listed slots.  Metavariables already bound must agree
    syntactically.
    """
    unbound = metavars_of(p) - set(partial.values)
    if unbound and not is_pattern(p):
        raise MatchError("match_pattern requires a pattern")
    if not unbound:
        # fully determined: matching degenerates to an equality check
        return partial if eval_metaterm(p, partial, doc, level) == t else None
    return match_metaterm_relaxed(p, t, partial, doc, level, uses_fresh)


def match_metaterm_relaxed(
    p,
    t: Term,
    partial: Assignment,
    doc,
    level: int,
    uses_fresh: dict | None = None,
) -> Assignment | None:
    """Matching without the linearity precondition: repeats must agree syntactically."""
    uses_fresh = uses_fresh or {}

    def go(p, t: Term, level: int, a: Assignment) -> Assignment | None:
        x = a.base
        match p:
            case Fresh(i):
                return a if t == Var(x + i) else None
            case MOp(name, pargs):
                if not isinstance(t, Op) or t.name != name:
                    return None
                if len(pargs) != len(t.args):
                    return None
                spec = doc.op(name)
                ks = arg_binders(spec, t.args)
                for parg, targ, k in zip(pargs, t.args, ks):
                    a = go(parg, targ, level + k, a)
                    if a is None:
                        return None
                return a
            case MVar(name, subs):
                if name in a and all(isinstance(s, Fresh) for s in subs):
                    return a if eval_metaterm(p, a, doc, level) == t else None
                if not all(isinstance(s, Fresh) for s in subs):
                    raise MatchError(f"metavariable {p!r} is not in pattern form")
                slots = [s.index for s in subs]
                value = _retract(t, x, level, slots, doc)
                if value is None:
                    return None
                for k in uses_fresh.get(name, ()):  # slots that must really occur
                    if not occurs(value, x + k):
                        return None
                return a.extended(name, value)
        raise MatchError(f"not a monad pattern: {p!r}")

    return go(p, t, level, partial)


def _retract(t: Term, x: int, level: int, slots: list[int], doc) -> Term | None:
    """Map t : Term@(x+level) onto scope x+len(slots), sending x+slots[k] to x+k.

    Returns None when t mentions a fresh variable outside `slots`.
    """
    table = {}
    for k, s in enumerate(slots):
        table[x + s] = x + k

    def go(t: Term, extra: int) -> Term | None:
        match t:
            case Var(i):
                if i < x:
                    return t
                if i >= x + level:  # bound inside t itself
                    if i < x + level + extra:
                        return Var(i - level + len(slots))
                    raise MatchError(f"variable {i} outside scope")
                j = table.get(i)
                return None if j is None else Var(j)
            case Op(name, args):
                spec = doc.op(name)
                ks = arg_binders(spec, args)
                out = []
                for arg, k in zip(args, ks):
                    v = go(arg, extra + k)
                    if v is None:
                        return None
                    out.append(v)
                return make_op(doc, name, out)
        raise MatchError(f"not a term: {t!r}")

    return go(t, 0)


def msubst_fresh(mt: MetaTerm, replacements: list[MetaTerm], level: int):
    """Substitute the `level` ambient fresh slots of mt by fresh-slot-free metaterms.

    Used to normalize rules (uncurrying): Fresh(i) with i < level becomes
    replacements[i]; slots bound inside mt shift down by `level`.
    """

    def go(mt):
        match mt:
            case Fresh(i):
                return replacements[i] if i < level else Fresh(i - level)
            case MOp(name, args):
                return MOp(name, tuple(go(a) for a in args))
            case MVar(name, subs):
                return MVar(name, tuple(go(s) for s in subs))
            case SOp(name, args):
                return SOp(name, tuple(go(a) for a in args))
            case SEmbed(name, arg):
                return SEmbed(name, go(arg))
        raise MatchError(f"not a metaterm: {mt!r}")

    return go(mt)
