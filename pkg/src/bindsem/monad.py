"""Parallel capture-avoiding substitution and its derived operations.

Terms over a signature form a monad: variables are the unit, `subst` the
multiplication.  Weakening, unary substitution, fresh-variable swap and
renaming are all instances of (or fast paths for) `subst`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .terms import Op, Term, TermError, Var, arg_binders, make_op


@dataclass(frozen=True)
class SubstMap:
    """A total map from variables at scope `domain` to terms at scope `codomain`."""

    domain: int
    codomain: int
    images: tuple

    def __post_init__(self):
        if len(self.images) != self.domain:
            raise TermError(
                f"substitution map has {len(self.images)} images for scope {self.domain}"
            )

    def __call__(self, i: int) -> Term:
        return self.images[i]

    @staticmethod
    def identity(n: int) -> "SubstMap":
        return SubstMap(n, n, tuple(Var(i) for i in range(n)))

    @staticmethod
    def of(domain: int, codomain: int, images) -> "SubstMap":
        return SubstMap(domain, codomain, tuple(images))

    def lift(self, k: int, doc) -> "SubstMap":
        """Lift under k binders: fresh indices map to themselves, old images weaken."""
        if k == 0:
            return self
        images = tuple(weaken(t, k, self.codomain, doc) for t in self.images) + tuple(
            Var(self.codomain + j) for j in range(k)
        )
        return SubstMap(self.domain + k, self.codomain + k, images)

    def then(self, g: "SubstMap", doc) -> "SubstMap":
        """Kleisli composition: (f;g)(i) = subst(f(i), g)."""
        if self.codomain != g.domain:
            raise TermError("substitution maps do not compose")
        return SubstMap(
            self.domain, g.codomain, tuple(subst(t, g, doc) for t in self.images)
        )


def subst(t: Term, f: SubstMap, doc) -> Term:
    """Simultaneous substitution of every variable of t by its image under f.

    Sorted collections are re-canonicalized on the way out so quotiented terms
    stay canonical.
    """
    match t:
        case Var(i):
            if i >= f.domain:
                raise TermError(f"variable {i} outside substitution domain {f.domain}")
            return f(i)
        case Op(name, args):
            spec = doc.op(name)
            ks = arg_binders(spec, args)
            return make_op(
                doc, name, [subst(a, f.lift(k, doc), doc) for a, k in zip(args, ks)]
            )
    raise TermError(f"not a term: {t!r}")


def rename(t: Term, r: list[int], n: int, m: int, doc) -> Term:
    """Variable renaming n -> m; equal to subst with variable images, but cheaper.

    With append-style scopes, going under a binder of k variables sends bound
    index n+j to m+j while ambient images stay untouched.
    """
    if len(r) != n:
        raise TermError(f"renaming has {len(r)} entries for scope {n}")

    def go(t: Term, extra: int) -> Term:
        match t:
            case Var(i):
                if i < n:
                    j = r[i]
                    if not 0 <= j < m:
                        raise TermError(f"renaming image {j} outside scope {m}")
                    return Var(j)
                if i < n + extra:
                    return Var(m + (i - n))
                raise TermError(f"variable {i} outside scope {n + extra}")
            case Op(name, args):
                spec = doc.op(name)
                ks = arg_binders(spec, args)
                return make_op(doc, name, [go(a, extra + k) for a, k in zip(args, ks)])
        raise TermError(f"not a term: {t!r}")

    return go(t, 0)


def weaken(t: Term, k: int, n: int, doc) -> Term:
    """View t : Term@n at scope n+k; free indices stay put, binders renumber up."""
    if k < 0:
        raise TermError("cannot weaken by a negative amount")
    if k == 0:
        return t
    return rename(t, list(range(n)), n, n + k, doc)


def unary_subst(t: Term, u: Term, n: int, doc) -> Term:
    """Substitute the topmost fresh variable (index n) of t : Term@(n+1) by u : Term@n."""
    images = tuple(Var(i) for i in range(n)) + (u,)
    return subst(t, SubstMap(n + 1, n, images), doc)


def multi_subst(t: Term, us: list[Term], n: int, doc) -> Term:
    """Substitute the k topmost fresh variables of t : Term@(n+k) by us (index n+j -> us[j])."""
    images = tuple(Var(i) for i in range(n)) + tuple(us)
    return subst(t, SubstMap(n + len(us), n, images), doc)


def swap(t: Term, n: int, doc) -> Term:
    """Exchange the two topmost fresh variables of t : Term@(n+2)."""
    if n < 0:
        raise TermError("swap needs a scope of at least 2")
    images = tuple(Var(i) for i in range(n)) + (Var(n + 1), Var(n))
    return subst(t, SubstMap(n + 2, n + 2, images), doc)
