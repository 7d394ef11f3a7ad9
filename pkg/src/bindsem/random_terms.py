"""Seeded random generators for terms and substitutions.

Everything is driven by `random.Random` instances split from a single seed,
so suite output is reproducible byte for byte.
"""

from __future__ import annotations

import random

from .monad import SubstMap
from .terms import Term, Var, make_op


def split(seed: int, label: str) -> random.Random:
    return random.Random(f"{seed}:{label}")


def random_term(rng: random.Random, doc, scope: int, size: int) -> Term:
    """A well-scoped term with at most `size` operation nodes.

    Leaf-biased when the budget runs low; signatures without nullary
    operations need scope > 0 somewhere, so binders are taken when required.
    """
    ops = [o for o in doc.ops if not o.variadic]
    leaf_ops = [o for o in ops if len(o.binders) == 0]
    if size <= 0 or not ops:
        if scope > 0 and (leaf_ops == [] or rng.random() < 0.7):
            return Var(rng.randrange(scope))
        if leaf_ops:
            return make_op(doc, rng.choice(leaf_ops).name, [])
        # no variables and no constants in reach: grow the scope with a binder
        ops = [o for o in ops if any(b > 0 for b in o.binders)]
    if scope > 0 and rng.random() < 0.3:
        return Var(rng.randrange(scope))
    if not ops:
        return Var(rng.randrange(scope))
    op = rng.choice(ops)
    budget = max(size - 1, 0)
    args = []
    per = max(budget // max(len(op.binders), 1), 0)
    for k in op.binders:
        args.append(random_term(rng, doc, scope + k, rng.randint(0, per)))
    return make_op(doc, op.name, args)


def random_subst(rng: random.Random, doc, n: int, m: int, size: int = 4) -> SubstMap:
    return SubstMap(
        n, m, tuple(random_term(rng, doc, m, rng.randint(0, size)) for _ in range(n))
    )


def enumerate_terms(doc, scope: int, max_nodes: int):
    """All terms with at most max_nodes nodes (variables and ops both count)."""
    ops = [o for o in doc.ops if not o.variadic]

    def of_size(n: int, sc: int):
        if n <= 0:
            return
        if n == 1:
            for i in range(sc):
                yield Var(i)
            for o in ops:
                if not o.binders:
                    yield make_op(doc, o.name, [])
            return
        for o in ops:
            arity = len(o.binders)
            if arity == 0:
                continue
            for split_sizes in _compositions(n - 1, arity):
                for args in _products(o.binders, split_sizes, sc):
                    yield make_op(doc, o.name, args)

    def _products(binders, sizes, sc):
        if not binders:
            yield []
            return
        for head in of_size(sizes[0], sc + binders[0]):
            for rest in _products(binders[1:], sizes[1:], sc):
                yield [head] + rest

    out = []
    seen = set()
    for n in range(1, max_nodes + 1):
        for t in of_size(n, scope):
            if t not in seen:  # sorted collections may collapse shapes
                seen.add(t)
                out.append(t)
    return out


def _compositions(total: int, parts: int):
    """All ways to write total as an ordered sum of `parts` positive integers."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest
