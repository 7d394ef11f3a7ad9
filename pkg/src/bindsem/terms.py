"""Well-scoped de Bruijn terms: construction, scope checking, ordering, printing, parsing.

A scope is a natural number n; variables are indices 0..n-1.  Binders extend
the scope by appending: an argument with k binders lives at scope n+k, and its
bound variables are the indices n..n+k-1 (innermost binder = highest index).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator


class TermError(Exception):
    """Malformed term: bad arity, unknown operation, or scope violation."""


@dataclass(frozen=True, slots=True)
class Var:
    index: int

    def __repr__(self) -> str:
        return f"Var({self.index})"


@dataclass(frozen=True, slots=True)
class Op:
    name: str
    args: tuple

    def __repr__(self) -> str:
        inner = ", ".join(repr(a) for a in self.args)
        return f"Op({self.name!r}, ({inner}))"


Term = Var | Op


def make_op(doc, name: str, args) -> Op:
    """Build an operation node, enforcing arity and collection canonicity.

    For sorted / sorted-dedup collections the argument list is put into
    canonical order (deduplicated for sorted-dedup); all other invariants of
    the node are checked against the signature.
    """
    spec = doc.op(name)
    args = tuple(args)
    if spec.variadic:
        if spec.collection == "ordered" and len(args) == 0:
            raise TermError(f"variadic op {name} needs at least zero args")
    elif len(args) != len(spec.binders):
        raise TermError(
            f"op {name} expects {len(spec.binders)} args, got {len(args)}"
        )
    if spec.collection != "ordered":
        args = tuple(sorted(args, key=_order_key))
        if spec.collection == "sorted-dedup":
            deduped = []
            for a in args:
                if not deduped or deduped[-1] != a:
                    deduped.append(a)
            args = tuple(deduped)
    return Op(name, args)


def arg_binders(spec, args) -> list[int]:
    """Binder count for each actual argument (variadic ops repeat theirs)."""
    if spec.variadic:
        return [spec.binders[0]] * len(args)
    return list(spec.binders)


def well_scoped(t: Term, n: int, doc) -> bool:
    match t:
        case Var(i):
            return 0 <= i < n
        case Op(name, args):
            spec = doc.ops_by_name.get(name)
            if spec is None:
                return False
            if not spec.variadic and len(args) != len(spec.binders):
                return False
            ks = arg_binders(spec, args)
            if spec.collection != "ordered":
                canon = make_op(doc, name, args)
                if canon.args != args:
                    return False
            return all(well_scoped(a, n + k, doc) for a, k in zip(args, ks))
    return False


def term_compare(t: Term, u: Term) -> int:
    """Total structural order: Var < Op; Vars by index; Ops by name then argwise."""
    match t, u:
        case Var(i), Var(j):
            return (i > j) - (i < j)
        case Var(_), Op(_, _):
            return -1
        case Op(_, _), Var(_):
            return 1
        case Op(n1, a1), Op(n2, a2):
            if n1 != n2:
                return -1 if n1 < n2 else 1
            for x, y in zip(a1, a2):
                c = term_compare(x, y)
                if c != 0:
                    return c
            return (len(a1) > len(a2)) - (len(a1) < len(a2))
    raise TermError(f"not terms: {t!r}, {u!r}")


class _OrderKey:
    __slots__ = ("t",)

    def __init__(self, t: Term):
        self.t = t

    def __lt__(self, other: "_OrderKey") -> bool:
        return term_compare(self.t, other.t) < 0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _OrderKey) and term_compare(self.t, other.t) == 0


def _order_key(t: Term) -> _OrderKey:
    return _OrderKey(t)


def subterms(t: Term) -> Iterator[Term]:
    """Preorder traversal."""
    yield t
    if isinstance(t, Op):
        for a in t.args:
            yield from subterms(a)


def term_size(t: Term) -> int:
    """Total node count (variables and operations alike)."""
    return sum(1 for _ in subterms(t))


# ---------------------------------------------------------------------------
# Printing

def print_term(t: Term, doc, names: list[str] | None = None) -> str:
    """Render a term in the concrete grammar.

    `names` assigns identifiers to the ambient scope (index order).  Binder
    names are generated deterministically as x<index>, suffixed with "_" until
    free of collisions with ambient names.
    """
    names = list(names or [])
    taken = set(names)

    def fresh_name(pos: int) -> str:
        cand = f"x{pos}"
        while cand in taken:
            cand += "_"
        return cand

    def go(t: Term, env: list[str]) -> str:
        match t:
            case Var(i):
                if i >= len(env):
                    raise TermError(f"variable {i} out of scope {len(env)}")
                return env[i]
            case Op(name, args):
                spec = doc.op(name)
                ks = arg_binders(spec, args)
                parts = []
                for a, k in zip(args, ks):
                    if k == 0:
                        parts.append(go(a, env))
                    else:
                        binders = [fresh_name(len(env) + j) for j in range(k)]
                        taken.update(binders)
                        parts.append(" ".join(binders) + ". " + go(a, env + binders))
                        taken.difference_update(set(binders) - set(names))
                return f"{name}({', '.join(parts)})"
        raise TermError(f"not a term: {t!r}")

    return go(t, names)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_']*|[().,])")

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*$")


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.toks: list[tuple[str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                if text[pos:].strip() == "":
                    break
                raise TermError(f"unexpected character at offset {pos}: {text[pos]!r}")
            self.toks.append((m.group(1), m.start(1)))
            pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def next(self) -> str:
        if self.i >= len(self.toks):
            raise TermError("unexpected end of input")
        tok = self.toks[self.i][0]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise TermError(f"expected {tok!r}, got {got!r}")

    def done(self) -> bool:
        return self.i >= len(self.toks)


def parse_term(text: str, n: int, doc, names: list[str] | None = None) -> Term:
    """Parse the term grammar; `names` gives the ambient scope (length n)."""
    names = list(names if names is not None else [f"v{i}" for i in range(n)])
    if len(names) != n:
        raise TermError(f"scope declares {n} variables but {len(names)} names given")
    toks = _Tokens(text)
    t = _parse(toks, names, doc)
    if not toks.done():
        raise TermError(f"trailing input after term: {toks.peek()!r}")
    return t


def _parse(toks: _Tokens, env: list[str], doc) -> Term:
    head = toks.next()
    if not IDENT.match(head):
        raise TermError(f"expected identifier, got {head!r}")
    if toks.peek() == "(" and head in doc.ops_by_name:
        spec = doc.op(head)
        toks.expect("(")
        args: list[Term] = []
        if toks.peek() == ")":
            toks.next()
        else:
            while True:
                args.append(_parse_arg(toks, env, doc, spec, len(args)))
                if toks.peek() == ",":
                    toks.next()
                    continue
                toks.expect(")")
                break
        return make_op(doc, head, args)
    try:
        return Var(_lookup(env, head))
    except TermError:
        if head in doc.ops_by_name:
            raise TermError(f"operation {head} must be applied with parentheses")
        raise


def _parse_arg(toks: _Tokens, env: list[str], doc, spec, pos: int):
    k = spec.binders[0] if spec.variadic else (
        spec.binders[pos] if pos < len(spec.binders) else None
    )
    if k is None:
        raise TermError(f"op {spec.name} given too many arguments")
    if k == 0:
        return _parse(toks, env, doc)
    # binder-prefixed argument: name+ "." term
    binders = []
    for _ in range(k):
        name = toks.next()
        if not IDENT.match(name):
            raise TermError(f"expected binder name, got {name!r}")
        binders.append(name)
    toks.expect(".")
    return _parse(toks, env + binders, doc)


def _lookup(env: list[str], name: str) -> int:
    # innermost binding wins (search from the top of the scope)
    for i in range(len(env) - 1, -1, -1):
        if env[i] == name:
            return i
    raise TermError(f"unbound name: {name}")
