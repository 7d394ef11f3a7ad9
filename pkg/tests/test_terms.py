import pytest

from bindsem import (
    Op,
    Var,
    parse_term,
    print_term,
    term_compare,
    well_scoped,
)
from bindsem.random_terms import random_term, split
from bindsem.terms import TermError, make_op


def test_well_scoped_var(lc):
    assert well_scoped(Var(0), 1, lc)
    assert not well_scoped(Var(1), 1, lc)


def test_well_scoped_binding(lc):
    # app(abs(x. x), y) over a one-variable scope
    t = Op("app", (Op("abs", (Var(1),)), Var(0)))
    assert well_scoped(t, 1, lc)
    assert not well_scoped(t, 0, lc)


def test_parse_de_bruijn_transliteration(lc):
    t = parse_term("app(abs(x. x), y)", 1, lc, ["y"])
    assert t == Op("app", (Op("abs", (Var(1),)), Var(0)))


def test_parse_right_nested(monoid):
    t = parse_term("m(a, m(b, c))", 3, monoid, ["a", "b", "c"])
    assert t == Op("m", (Var(0), Op("m", (Var(1), Var(2)))))


def test_parse_shadowing(lc):
    # innermost binder wins
    t = parse_term("abs(x. abs(x. x))", 0, lc, [])
    assert t == Op("abs", (Op("abs", (Var(1),)),))


def test_parse_errors(lc):
    with pytest.raises(TermError):
        parse_term("app(x)", 1, lc, ["x"])  # arity mismatch
    with pytest.raises(TermError):
        parse_term("foo(x)", 1, lc, ["x"])  # unknown op
    with pytest.raises(TermError):
        parse_term("app(x, z)", 1, lc, ["x"])  # unbound name


def test_print_parse_roundtrip_random(lc, monoid, lc_ex):
    rng = split(0, "roundtrip")
    for doc in (lc, monoid, lc_ex):
        for _ in range(170):
            n = rng.randrange(4)
            t = random_term(rng, doc, n, rng.randint(0, 8))
            names = [f"v{i}" for i in range(n)]
            assert parse_term(print_term(t, doc, names), n, doc, names) == t


def test_compare_examples():
    assert term_compare(Var(0), Var(1)) < 0
    t = Op("app", (Var(0), Var(1)))
    assert term_compare(t, t) == 0
    assert term_compare(Var(3), t) < 0  # variables before operations


def test_compare_total_order(lc):
    rng = split(1, "order")
    terms = [random_term(rng, lc, 2, rng.randint(0, 6)) for _ in range(64)]
    for t in terms:
        assert term_compare(t, t) == 0
    for a in terms[:32]:
        for b in terms[:32]:
            ab, ba = term_compare(a, b), term_compare(b, a)
            assert ab == -ba
            if ab == 0:
                assert a == b  # antisymmetry on distinct trees
    # transitivity spot checks
    for i in range(0, 45, 3):
        a, b, c = sorted(terms[i:i + 3], key=lambda t: _key(t, terms))
        if term_compare(a, b) <= 0 and term_compare(b, c) <= 0:
            assert term_compare(a, c) <= 0


def _key(t, terms):
    import functools

    return functools.cmp_to_key(term_compare)(t)


def test_sorted_collection_canonical():
    from bindsem import parse_signature

    doc = parse_signature("op por 2 0 0 sorted;\nop k 0;\n")
    a, b = Var(0), Var(1)
    assert make_op(doc, "por", [b, a]) == make_op(doc, "por", [a, b])
    dd = parse_signature("op ps 2 0 0 sorted-dedup;\n")
    assert make_op(dd, "ps", [a, a]) == Op("ps", (a,))


def test_construction_arity_checked(lc):
    with pytest.raises(TermError):
        make_op(lc, "app", [Var(0)])


def test_variadic_sorted_dedup_op():
    """A finite-subset-style operator: any arity, sorted, duplicates collapse."""
    from bindsem import parse_signature, subst, validate
    from bindsem.monad import SubstMap

    doc = parse_signature("op top 2 0 0;\nop sup 1 0 sorted-dedup variadic;\n")
    assert validate(doc).accepted
    t = parse_term("sup(b, a, b)", 2, doc, ["a", "b"])
    assert t == Op("sup", (Var(0), Var(1)))
    assert well_scoped(t, 2, doc)
    assert print_term(t, doc, ["a", "b"]) == "sup(a, b)"
    # substitution re-canonicalizes: identified images collapse
    f = SubstMap(2, 1, (Var(0), Var(0)))
    assert subst(t, f, doc) == Op("sup", (Var(0),))
    # empty and unary collections are fine
    assert parse_term("sup()", 0, doc, []) == Op("sup", ())
    nested = parse_term("sup(top(a, b), a)", 2, doc, ["a", "b"])
    assert nested.args[0] == Var(0)  # variables order before operations
