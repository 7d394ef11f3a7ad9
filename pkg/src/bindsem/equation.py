"""Decidable quotient by equations: rewriting to canonical normal forms.

Oriented (rewrite-lr) equations are applied innermost-leftmost until no redex
remains; canonical-mode equations are realized by named canonicalizer hooks
(argument sorting happens at construction time, commuting explicit
substitutions take the least element of their reordering orbit).  A step
budget guards against non-terminating rewrite sets.
"""

from __future__ import annotations

from dataclasses import dataclass

from .metaterm import Assignment, eval_metaterm, match_metaterm_relaxed
from .monad import swap
from .signature import SignatureDoc
from .terms import Op, Term, Var, arg_binders, make_op, term_compare


class BudgetError(Exception):
    """The normalization step budget ran out (non-terminating equation set?)."""


DEFAULT_BUDGET = 10**5


@dataclass(frozen=True)
class NormalizationTrace:
    steps: tuple  # (position, equation name, before, after)
    result: Term


def _inert(doc: SignatureDoc) -> bool:
    if "inert" not in doc._cache:
        doc._cache["inert"] = not doc.equations and all(
            o.collection == "ordered" for o in doc.ops
        )
    return doc._cache["inert"]


def normalize(t: Term, doc: SignatureDoc, scope: int,
              budget: int = DEFAULT_BUDGET) -> NormalizationTrace:
    """Exhaustive innermost-leftmost rewriting interleaved with canonicalizers.

    Commutation-style equations (canonical mode) are resolved afterwards by
    picking the least element of the finite orbit the equation generates.
    """
    if _inert(doc):
        # no equations and no sorted collections: every term is canonical
        return NormalizationTrace(steps=(), result=t)
    steps: list = []
    remaining = [budget]

    rewrites = [eq for eq in doc.equations if eq.mode == "rewrite-lr" and eq.level == 0]
    hooks = [eq for eq in doc.equations if eq.mode == "canonical"]

    def root_step(t: Term, sc: int):
        for eq in rewrites:
            a = match_metaterm_relaxed(eq.lhs, t, Assignment(sc), doc, 0)
            if a is not None:
                return eq.name, eval_metaterm(eq.rhs, a, doc, 0)
        return None

    def nf(t: Term, sc: int, path: tuple) -> Term:
        match t:
            case Var(_):
                return t
            case Op(name, args):
                spec = doc.op(name)
                ks = arg_binders(spec, args)
                t = make_op(
                    doc,
                    name,
                    [nf(a, sc + k, path + (i,)) for i, (a, k) in enumerate(zip(args, ks))],
                )
        while True:
            hit = root_step(t, sc)
            if hit is None:
                return t
            eq_name, result = hit
            if remaining[0] <= 0:
                raise BudgetError(
                    f"normalization budget exhausted at {eq_name} (budget {budget})"
                )
            remaining[0] -= 1
            steps.append((path, eq_name, t, result))
            t = _renormalize_children(result, sc, path)

    def _renormalize_children(t: Term, sc: int, path: tuple) -> Term:
        match t:
            case Var(_):
                return t
            case Op(name, args):
                spec = doc.op(name)
                ks = arg_binders(spec, args)
                return make_op(
                    doc,
                    name,
                    [nf(a, sc + k, path + (i,)) for i, (a, k) in enumerate(zip(args, ks))],
                )
        return t

    result = nf(t, scope, ())
    if any(eq.hook == "esubst-commute" for eq in hooks):
        name = next(eq.name for eq in hooks if eq.hook == "esubst-commute")
        # reordering could expose new rewrite redexes when both kinds mix;
        # alternate the phases until stable
        while True:
            result = _orbit_minimum(result, doc, scope, steps, name)
            again = nf(result, scope, ())
            if again == result:
                break
            result = again
    return NormalizationTrace(steps=tuple(steps), result=result)


ORBIT_BUDGET = 4096


def _orbit_minimum(t0: Term, doc: SignatureDoc, scope: int, steps: list,
                   eq_name: str) -> Term:
    """Least element of the orbit generated by commuting explicit substitutions.

    Independent substitution pairs may swap in either direction; the reachable
    set is a finite set of reorderings, so breadth-first search finds a true
    canonical representative (equal inputs have equal orbits, hence equal
    minima), recorded step by step in the trace.
    """
    seen: dict = {t0: None}  # term -> (parent, step record)
    queue = [t0]
    best = t0
    while queue and len(seen) <= ORBIT_BUDGET:
        t = queue.pop(0)
        for (path, before, after, t2) in _swap_successors(t, doc, scope):
            if t2 in seen:
                continue
            seen[t2] = (t, (path, eq_name, before, after))
            queue.append(t2)
            if term_compare(t2, best) < 0:
                best = t2
    chain = []
    node = best
    while seen[node] is not None:
        parent, record = seen[node]
        chain.append(record)
        node = parent
    steps.extend(reversed(chain))
    return best


def _swap_successors(t: Term, doc: SignatureDoc, scope: int):
    """All single reorderings of an adjacent independent substitution pair."""
    out = []

    def at(t: Term, sc: int, path: tuple, rebuild):
        swapped = _esubst_swap(t, sc, doc)
        if swapped is not None:
            out.append((path, t, swapped, rebuild(swapped)))
        match t:
            case Op(name, args):
                spec = doc.op(name)
                ks = arg_binders(spec, args)
                for i, (a, k) in enumerate(zip(args, ks)):
                    def rb(new, i=i, t=t, rebuild=rebuild):
                        fresh = list(t.args)
                        fresh[i] = new
                        return rebuild(make_op(doc, t.name, fresh))

                    at(a, sc + k, path + (i,), rb)
            case _:
                pass

    at(t, scope, (), lambda x: x)
    return out


def _esubst_swap(t: Term, sc: int, doc: SignatureDoc) -> Term | None:
    """Exchange an adjacent pair of independent explicit substitutions.

    t[x/u][y/v] with y not free in u commutes with t[y/v][x/u]; returns None
    when the pair is dependent or t is not such a pair.
    """
    match t:
        case Op("esubst", (Op("esubst", (body, inner_u)), outer_v)):
            pass
        case _:
            return None
    # inner_u lives under the outer binder (index sc); independence means the
    # binder does not occur, i.e. inner_u retracts to some u at scope sc
    from .metaterm import _retract
    from .monad import weaken

    u = _retract(inner_u, sc, 1, [], doc)
    if u is None:
        return None
    swapped = swap(body, sc, doc)
    new_inner = make_op(doc, "esubst", [swapped, weaken(outer_v, 1, sc, doc)])
    return make_op(doc, "esubst", [new_inner, u])


def equal_mod(t: Term, u: Term, doc: SignatureDoc, scope: int,
              budget: int = DEFAULT_BUDGET) -> bool:
    """Equality in the quotient: compare canonical representatives."""
    return (
        normalize(t, doc, scope, budget).result
        == normalize(u, doc, scope, budget).result
    )


def check_equation(eq, a: Assignment, doc: SignatureDoc,
                   budget: int = DEFAULT_BUDGET) -> bool:
    """Does the instance of eq at the assignment hold modulo the doc's equations?"""
    lhs = eval_metaterm(eq.lhs, a, doc, eq.level)
    rhs = eval_metaterm(eq.rhs, a, doc, eq.level)
    return equal_mod(lhs, rhs, doc, a.base + eq.level, budget)
