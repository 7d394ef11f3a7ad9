"""Independent named-variable implementation of capture-avoiding substitution.

This is the reference the de Bruijn engine is checked against: terms carry
explicit names, substitution renames binders away from capture the textbook
way.  It deliberately shares no code with the monad module.
"""

from __future__ import annotations

from dataclasses import dataclass

from .terms import Op, Term, Var, arg_binders


@dataclass(frozen=True)
class NVar:
    name: str


@dataclass(frozen=True)
class NOp:
    name: str
    args: tuple  # ((binder names tuple, body), ...)


NTerm = NVar | NOp


def to_named(t: Term, names: list[str], doc) -> NTerm:
    """De Bruijn -> named, binders named b<position>."""
    match t:
        case Var(i):
            return NVar(names[i])
        case Op(op, args):
            spec = doc.op(op)
            out = []
            for a, k in zip(args, arg_binders(spec, args)):
                binders = tuple(f"b{len(names) + j}" for j in range(k))
                out.append((binders, to_named(a, names + list(binders), doc)))
            return NOp(op, tuple(out))
    raise TypeError(f"not a term: {t!r}")


def from_named(t: NTerm, names: list[str], doc) -> Term:
    match t:
        case NVar(x):
            for i in range(len(names) - 1, -1, -1):
                if names[i] == x:
                    return Var(i)
            raise ValueError(f"unbound name {x}")
        case NOp(op, args):
            from .terms import make_op

            return make_op(
                doc,
                op,
                [from_named(body, names + list(binders), doc)
                 for (binders, body) in args],
            )
    raise TypeError(f"not a named term: {t!r}")


def free_names(t: NTerm) -> set[str]:
    match t:
        case NVar(x):
            return {x}
        case NOp(_, args):
            out: set[str] = set()
            for (binders, body) in args:
                out |= free_names(body) - set(binders)
            return out
    raise TypeError(f"not a named term: {t!r}")


def named_subst(t: NTerm, mapping: dict[str, NTerm]) -> NTerm:
    """Simultaneous capture-avoiding substitution with on-the-fly renaming."""
    match t:
        case NVar(x):
            return mapping.get(x, t)
        case NOp(op, args):
            out = []
            for (binders, body) in args:
                inner = {x: u for x, u in mapping.items() if x not in binders}
                avoid = set()
                for u in inner.values():
                    avoid |= free_names(u)
                avoid |= free_names(body)
                fresh = []
                renaming = {}
                for b in binders:
                    if b in avoid:
                        candidate = b
                        while candidate in avoid:
                            candidate += "'"
                        renaming[b] = NVar(candidate)
                        fresh.append(candidate)
                        avoid.add(candidate)
                    else:
                        fresh.append(b)
                        avoid.add(b)
                if renaming:
                    body = named_subst(body, renaming)
                out.append((tuple(fresh), named_subst(body, inner)))
            return NOp(op, tuple(out))
    raise TypeError(f"not a named term: {t!r}")


def alpha_eq(t: NTerm, u: NTerm, env: tuple = ()) -> bool:
    match t, u:
        case NVar(x), NVar(y):
            for (a, b) in reversed(env):
                if x == a or y == b:
                    return x == a and y == b
            return x == y
        case NOp(op1, args1), NOp(op2, args2):
            if op1 != op2 or len(args1) != len(args2):
                return False
            for (bs1, body1), (bs2, body2) in zip(args1, args2):
                if len(bs1) != len(bs2):
                    return False
                if not alpha_eq(body1, body2, env + tuple(zip(bs1, bs2))):
                    return False
            return True
    return False


def oracle_subst(t: Term, images: list[Term], n: int, m: int, doc) -> Term:
    """Reference substitution: run the named-variable route and come back.

    t lives at scope n, each image at scope m; the result is compared against
    the engine's subst by the law suites.
    """
    src_names = [f"v{i}" for i in range(n)]
    dst_names = [f"w{i}" for i in range(m)]
    named = to_named(t, src_names, doc)
    mapping = {
        f"v{i}": to_named(images[i], dst_names, doc) for i in range(n)
    }
    result = named_subst(named, mapping)
    return from_named(result, dst_names, doc)
