"""The substitution monad against the independent named-variable oracle."""

import pytest

from bindsem import Op, SubstMap, Var, parse_term, rename, subst, swap, unary_subst, weaken
from bindsem.monad import multi_subst
from bindsem.oracles import oracle_subst
from bindsem.random_terms import random_subst, random_term, split
from bindsem.terms import TermError


def test_subst_example(lc):
    # subst(app(x, y), {x -> abs(z. z), y -> y}) = app(abs(z. z), y)
    t = parse_term("app(x, y)", 2, lc, ["x", "y"])
    f = SubstMap.of(2, 1, [parse_term("abs(z. z)", 1, lc, ["y"]), Var(0)])
    got = subst(t, f, lc)
    assert got == parse_term("app(abs(z. z), y)", 1, lc, ["y"])
    assert got == oracle_subst(t, list(f.images), 2, 1, lc)


def test_subst_binder_image(lc):
    # the image contains a binder: its bound level must renumber under lifting
    t = parse_term("app(abs(x. abs(z. app(x, z))), abs(y. y))", 0, lc, [])
    body = t.args[0].args[0]
    got = unary_subst(body, t.args[1], 0, lc)
    assert got == parse_term("abs(z. app(abs(y. y), z))", 0, lc, [])


def test_right_unit_law(lc, lc_ex):
    rng = split(2, "right-unit")
    for doc in (lc, lc_ex):
        for _ in range(500):
            n = rng.randrange(5)
            t = random_term(rng, doc, n, rng.randint(0, 8))
            assert subst(t, SubstMap.identity(n), doc) == t


def test_left_unit_law(lc):
    rng = split(3, "left-unit")
    for _ in range(300):
        n = rng.randint(1, 4)
        f = random_subst(rng, lc, n, rng.randrange(4))
        i = rng.randrange(n)
        assert subst(Var(i), f, lc) == f(i)


def test_associativity_vs_oracle(lc):
    rng = split(4, "assoc")
    for _ in range(500):
        n, m, k = (rng.randint(0, 3) for _ in range(3))
        t = random_term(rng, lc, n, rng.randint(0, 6))
        f = random_subst(rng, lc, n, m)
        g = random_subst(rng, lc, m, k)
        left = subst(subst(t, f, lc), g, lc)
        right = subst(t, f.then(g, lc), lc)
        assert left == right
        assert left == oracle_subst(
            subst(t, f, lc), list(g.images), m, k, lc
        )


def test_subst_matches_oracle(lc, lc_ex):
    rng = split(5, "oracle")
    for doc in (lc, lc_ex):
        for _ in range(400):
            n, m = rng.randint(0, 4), rng.randint(0, 4)
            t = random_term(rng, doc, n, rng.randint(0, 8))
            f = random_subst(rng, doc, n, m)
            assert subst(t, f, doc) == oracle_subst(t, list(f.images), n, m, doc)


def test_weaken(lc):
    assert weaken(Var(0), 1, 1, lc) == Var(0)
    # fresh indices do not occur in the output
    rng = split(6, "weaken")
    from bindsem.metaterm import occurs

    for _ in range(200):
        n = rng.randint(0, 3)
        k = rng.randint(1, 3)
        t = random_term(rng, lc, n, rng.randint(0, 6))
        w = weaken(t, k, n, lc)
        assert not any(occurs(w, n + j) for j in range(k))
        # substituting for the absent variables is the identity
        images = tuple(Var(i) for i in range(n)) + tuple(
            random_term(rng, lc, n, 2) for _ in range(k)
        )
        assert subst(w, SubstMap(n + k, n, images), lc) == t


def test_unary_subst(lc):
    u = parse_term("abs(z. z)", 0, lc, [])
    # unary_subst(Var *, u) = u
    assert unary_subst(Var(0), u, 0, lc) == u
    # unary_subst(weaken(t, 1), u) = t
    rng = split(7, "unary")
    for _ in range(200):
        n = rng.randint(0, 3)
        t = random_term(rng, lc, n, rng.randint(0, 6))
        v = random_term(rng, lc, n, 3)
        assert unary_subst(weaken(t, 1, n, lc), v, n, lc) == t
    # unary_subst(app(*, y), abs(z. z)) = app(abs(z. z), y)
    t = parse_term("app(s, y)", 2, lc, ["y", "s"])
    u1 = parse_term("abs(z. z)", 1, lc, ["y"])
    assert unary_subst(t, u1, 1, lc) == parse_term("app(abs(z. z), y)", 1, lc, ["y"])


def test_swap(lc):
    t = parse_term("app(a, b)", 2, lc, ["a", "b"])
    assert swap(t, 0, lc) == parse_term("app(b, a)", 2, lc, ["a", "b"])
    rng = split(8, "swap")
    for _ in range(500):
        n = rng.randint(0, 3)
        t = random_term(rng, lc, n + 2, rng.randint(0, 7))
        assert swap(swap(t, n, lc), n, lc) == t
    # swap commutes with substitutions that only touch the lower variables
    for _ in range(150):
        n = rng.randint(0, 2)
        t = random_term(rng, lc, n + 2, rng.randint(0, 6))
        g = random_subst(rng, lc, n, n)
        f = g.lift(2, lc)
        assert subst(swap(t, n, lc), f, lc) == swap(subst(t, f, lc), n, lc)


def test_swap_scope_error(lc):
    with pytest.raises(TermError):
        swap(Var(0), -1, lc)


def test_rename_defining_equation(lc):
    rng = split(9, "rename")
    for _ in range(500):
        n, m = rng.randint(0, 4), rng.randint(1, 4)
        t = random_term(rng, lc, n, rng.randint(0, 7))
        table = [rng.randrange(m) for _ in range(n)]
        f = SubstMap(n, m, tuple(Var(j) for j in table))
        assert rename(t, table, n, m, lc) == subst(t, f, lc)
    # identity renaming
    for _ in range(100):
        n = rng.randint(0, 4)
        t = random_term(rng, lc, n, rng.randint(0, 6))
        assert rename(t, list(range(n)), n, n, lc) == t


def test_rename_composition(lc):
    rng = split(10, "rename-comp")
    for _ in range(200):
        n, m, k = rng.randint(0, 3), rng.randint(1, 3), rng.randint(1, 3)
        t = random_term(rng, lc, n, rng.randint(0, 6))
        r1 = [rng.randrange(m) for _ in range(n)]
        r2 = [rng.randrange(k) for _ in range(m)]
        assert rename(rename(t, r1, n, m, lc), r2, m, k, lc) == rename(
            t, [r2[j] for j in r1], n, k, lc
        )


def test_linearity_of_operations(lc, lc_ex):
    # subst distributes over every operation node (this is the implementation;
    # the assertion cross-checks it against the named oracle route)
    from bindsem.terms import arg_binders, make_op

    rng = split(11, "linear")
    for doc in (lc, lc_ex):
        for _ in range(300):
            n, m = rng.randint(0, 3), rng.randint(0, 3)
            t = random_term(rng, doc, n, rng.randint(1, 8))
            if not isinstance(t, Op):
                continue
            f = random_subst(rng, doc, n, m)
            spec = doc.op(t.name)
            ks = arg_binders(spec, t.args)
            via_args = make_op(
                doc, t.name,
                [subst(a, f.lift(k, doc), doc) for a, k in zip(t.args, ks)],
            )
            assert subst(t, f, doc) == via_args
            assert via_args == oracle_subst(t, list(f.images), n, m, doc)


def test_derivation_functor_law(lc):
    # weaken(subst(t, f), k) = subst(weaken(t, k), lift(f, k))
    rng = split(12, "functor")
    for _ in range(250):
        n, m, k = rng.randint(0, 3), rng.randint(0, 3), rng.randint(1, 3)
        t = random_term(rng, lc, n, rng.randint(0, 7))
        f = random_subst(rng, lc, n, m)
        assert weaken(subst(t, f, lc), k, m, lc) == subst(
            weaken(t, k, n, lc), f.lift(k, lc), lc
        )


def test_multi_subst(lc):
    t = parse_term("app(a, app(u, v))", 3, lc, ["a", "u", "v"])
    got = multi_subst(t, [Var(0), Var(0)], 1, lc)
    assert got == parse_term("app(a, app(a, a))", 1, lc, ["a"])
