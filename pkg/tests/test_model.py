"""Folds, translations, and translated derivations."""

from bindsem import Op, SubstMap, Var, check, parse_term, step, subst
from bindsem.model import (
    Model,
    builtin_model,
    catalog_translation,
    fold,
    translate,
    translate_derivation,
    translate_unary_cong,
    y_combinator,
)
from bindsem.metaterm import Assignment
from bindsem.oracles import free_names, to_named
from bindsem.random_terms import random_subst, random_term, split
from bindsem.reduction import instantiate


# ---------------------------------------------------------------------------
# Folds

def named_free_vars(t, names, doc):
    return frozenset(x for x in free_names(to_named(t, names, doc)) if x in names)


def clause_size(t):
    match t:
        case Var(_):
            return 0
        case Op("abs" | "fix", (body,)):
            return 1 + clause_size(body)
        case Op("app", (f, a)):
            return 1 + clause_size(f) + clause_size(a)
    raise AssertionError(t)


def clause_redexes(t):
    match t:
        case Var(_):
            return 0
        case Op("abs", (body,)):
            return clause_redexes(body)
        case Op("app", (f, a)):
            extra = 1 if isinstance(f, Op) and f.name == "abs" else 0
            return clause_redexes(f) + clause_redexes(a) + extra
    raise AssertionError(t)


def test_fold_free_vars_example(lc):
    t = parse_term("app(x, abs(y. app(y, x)))", 1, lc, ["x"])
    assert fold(t, [frozenset({"x"})], builtin_model("free_vars"), lc) == {"x"}


def test_fold_size_example(lc):
    t = parse_term("app(x, abs(y. app(y, x)))", 1, lc, ["x"])
    assert fold(t, [0], builtin_model("size"), lc) == 3
    assert fold(Var(0), [0], builtin_model("size"), lc) == 0
    t2 = parse_term("abs(x. app(x, x))", 0, lc, [])
    assert fold(t2, [], builtin_model("size"), lc) == 2


def test_fold_redex_count_examples(lc):
    t = parse_term("app(abs(x. x), y)", 1, lc, ["y"])
    assert fold(t, [(0, 0)], builtin_model("redex_count"), lc)[0] == 1
    t2 = parse_term("abs(x. app(abs(y. y), x))", 0, lc, [])
    assert fold(t2, [], builtin_model("redex_count"), lc)[0] == 1
    closed_abs = parse_term("abs(x. x)", 0, lc, [])
    assert fold(closed_abs, [], builtin_model("free_vars"), lc) == frozenset()


def test_fold_models_against_clause_recursion(lc):
    rng = split(50, "fold")
    for _ in range(300):
        n = rng.randint(0, 3)
        t = random_term(rng, lc, n, rng.randint(0, 7))
        names = [f"v{i}" for i in range(n)]
        env_fv = [frozenset({nm}) for nm in names]
        assert fold(t, env_fv, builtin_model("free_vars"), lc) == \
            named_free_vars(t, names, lc)
        assert fold(t, [0] * n, builtin_model("size"), lc) == clause_size(t)
        assert fold(t, [(0, 0)] * n, builtin_model("redex_count"), lc)[0] == \
            clause_redexes(t)


def test_free_vars_respects_substitution(lc):
    """free(t{f}) is the union of free(f(z)) over z free in t."""
    rng = split(51, "fv-subst")
    model = builtin_model("free_vars")
    for _ in range(500):
        n, m = rng.randint(0, 3), rng.randint(0, 3)
        t = random_term(rng, lc, n, rng.randint(0, 6))
        f = random_subst(rng, lc, n, m)
        names_m = [f"w{i}" for i in range(m)]
        env = [frozenset({nm}) for nm in names_m]
        left = fold(subst(t, f, lc), env, model, lc)
        fv_t = fold(t, [frozenset({i}) for i in range(n)], model, lc)
        right = frozenset().union(
            *[fold(f(i), env, model, lc) for i in fv_t]
        ) if fv_t else frozenset()
        assert left == right


def test_fold_with_user_model(lc):
    depth = Model(
        name="depth",
        actions={
            "app": lambda f, g: 1 + max(f(), g()),
            "abs": lambda f: 1 + f(0),
        },
    )
    t = parse_term("abs(x. app(x, abs(y. y)))", 0, lc, [])
    assert fold(t, [], depth, lc) == 3


# ---------------------------------------------------------------------------
# Term translations

def test_lj_ll_catalog_table():
    tr = catalog_translation("lj-ll")
    lj, ll = tr.source, tr.target
    cases = {
        "disj(a, b)": "oplus(bang(a), bang(b))",
        "conj(a, b)": "with(a, b)",
        "impl(a, b)": "lolli(bang(a), b)",
        "neg(a)": "lolli(bang(a), zero())",
        "forall(x. a)": "forall(x. a)",
        "exists(x. a)": "exists(x. bang(a))",
    }
    for src, want in cases.items():
        t = parse_term(src, 2, lj, ["a", "b"])
        assert translate(t, tr, 2) == parse_term(want, 2, ll, ["a", "b"])


def test_translate_is_monad_morphism():
    tr = catalog_translation("lj-ll")
    rng = split(52, "monad-morph")
    for _ in range(500):
        n, m = rng.randint(0, 3), rng.randint(0, 3)
        t = random_term(rng, tr.source, n, rng.randint(0, 6))
        f = random_subst(rng, tr.source, n, m)
        f_tr = SubstMap(n, m, tuple(translate(u, tr, m) for u in f.images))
        assert translate(subst(t, f, tr.source), tr, m) == \
            subst(translate(t, tr, n), f_tr, tr.target)


def test_fix_translation_syntactic():
    tr = catalog_translation("fix-lc")
    t = parse_term("fix(x. app(x, y))", 1, tr.source, ["y"])
    out = translate(t, tr, 1)
    y = y_combinator(tr.target, 1)
    body = parse_term("abs(x. app(x, y))", 1, tr.target, ["y"])
    assert out == Op("app", (y, body))


def test_lcex_translation():
    tr = catalog_translation("lcex-lc1cong")
    t = parse_term("esubst(x. app(x, x), abs(z. z))", 0, tr.source, [])
    got = translate(t, tr, 0)
    assert got == parse_term("app(abs(z. z), abs(z. z))", 0, tr.target, [])


# ---------------------------------------------------------------------------
# Derivation translations

def test_fix_exp_derivation_translates():
    tr = catalog_translation("fix-lc")
    src_doc, tgt_doc = tr.source, tr.target
    t = parse_term("fix(x. app(x, y))", 1, src_doc, ["y"])
    ds = [d for d in step(t, src_doc, 1) if d.rule == "fix-exp"]
    assert len(ds) == 1
    image = translate_derivation(ds[0], tr)
    assert check(image, tgt_doc)
    assert image.endpoints == (
        translate(ds[0].source, tr, 1),
        translate(ds[0].target, tr, 1),
    )
    assert image.rule == "trans"


def test_fix_derivations_random():
    tr = catalog_translation("fix-lc")
    rng = split(53, "fix-exp")
    cases = 0
    while cases < 200:
        n = rng.randint(0, 2)
        t = random_term(rng, tr.source, n, rng.randint(1, 6))
        ds = step(t, tr.source, n)
        if not ds:
            continue
        d = ds[rng.randrange(len(ds))]
        image = translate_derivation(d, tr)
        assert check(image, tr.target)
        assert image.endpoints == (
            translate(d.source, tr, n), translate(d.target, tr, n)
        )
        cases += 1


def test_lcex_rule_images():
    tr = catalog_translation("lcex-lc1cong")
    doc = tr.source
    # a Gc instance translates to reflexivity
    t = parse_term("esubst(x. u, u)", 1, doc, ["u"])
    gc = [d for d in step(t, doc, 1) if d.rule == "gc"][0]
    image = translate_derivation(gc, tr)
    assert image.rule == "refl"
    assert image.endpoints == (Var(0), Var(0))
    # beta is preserved
    tb = parse_term("app(abs(x. x), u)", 1, doc, ["u"])
    beta = [d for d in step(tb, doc, 1) if d.rule == "beta-red"][0]
    image_b = translate_derivation(beta, tr)
    assert image_b.rule == "beta-red"
    assert check(image_b, tr.target)


def test_lcex_derivations_random():
    tr = catalog_translation("lcex-lc1cong")
    rng = split(54, "lcex")
    cases = 0
    congruences = {"app-cong1", "app-cong2", "abs-cong"}
    while cases < 200:
        n = rng.randint(0, 2)
        t = random_term(rng, tr.source, n, rng.randint(1, 6))
        ds = step(t, tr.source, n)
        if not ds:
            continue
        d = ds[rng.randrange(len(ds))]
        image = translate_derivation(d, tr)
        assert image.endpoints == (
            translate(d.source, tr, n), translate(d.target, tr, n)
        )
        if d.rule in ("gc", "var-sub", "app-sub", "abs-sub", "sub-sub"):
            assert image.rule == "refl"
        if d.rule == "beta-red" or d.rule in congruences:
            assert image.rule == d.rule
        cases += 1


def test_lc1cong_to_closure_subst_cong():
    tr = catalog_translation("lc1cong-lcclosure")
    doc = tr.source
    u = parse_term("app(s, s)", 2, doc, ["y", "s"])  # context app(*, *)
    t0 = parse_term("app(abs(x. x), y)", 1, doc, ["y"])
    d = [x for x in step(t0, doc, 1) if x.rule == "beta-red"][0]
    inst = instantiate(
        doc, "subst-cong",
        Assignment(1, {"C": u, "T": d.source, "T'": d.target}),
        (d,),
    )
    image = translate_derivation(inst, tr)
    assert check(image, tr.target)
    from bindsem.monad import unary_subst

    assert image.endpoints == (
        unary_subst(u, d.source, 1, doc),
        unary_subst(u, d.target, 1, doc),
    )


def test_refl_maps_to_refl():
    tr = catalog_translation("lc1cong-lcclosure")
    t = parse_term("abs(x. x)", 0, tr.source, [])
    refl = instantiate(tr.source, "refl", Assignment(0, {"T": t}))
    image = translate_derivation(refl, tr)
    assert image.rule == "refl"
    assert image.endpoints == (t, t)


def test_composite_translation_lcex_to_closure():
    """lc_ex derivations translate end to end into the closure calculus."""
    first = catalog_translation("lcex-lc1cong")
    second = catalog_translation("lc1cong-lcclosure")
    rng = split(56, "composite")
    cases = 0
    while cases < 200:
        n = rng.randint(0, 2)
        t = random_term(rng, first.source, n, rng.randint(1, 6))
        ds = step(t, first.source, n)
        if not ds:
            continue
        d = ds[rng.randrange(len(ds))]
        mid = translate_derivation(d, first)
        final = translate_derivation(mid, second)
        assert check(final, second.target)
        want_src = translate(translate(d.source, first, n), second, n)
        want_tgt = translate(translate(d.target, first, n), second, n)
        assert final.endpoints == (want_src, want_tgt)
        cases += 1


def test_translate_unary_cong_examples(lc_closure):
    doc = lc_closure
    t0 = parse_term("app(abs(x. x), y)", 1, doc, ["y"])
    d = [x for x in step(t0, doc, 1, rules=["beta-red"])][0]
    # u = the fresh variable: the derivation itself
    assert translate_unary_cong(Var(1), d, doc, 1) == d
    # u = an untouched variable: reflexivity at it
    refl = translate_unary_cong(Var(0), d, doc, 1)
    assert refl.rule == "refl" and refl.endpoints == (Var(0), Var(0))
    # u = app(*, *): the two-sided congruence composite
    u = parse_term("app(s, s)", 2, doc, ["y", "s"])
    comp = translate_unary_cong(u, d, doc, 1)
    assert comp.rule == "trans"
    from bindsem.terms import make_op

    assert comp.endpoints == (
        make_op(doc, "app", [d.source, d.source]),
        make_op(doc, "app", [d.target, d.target]),
    )
    assert check(comp, doc)


def test_translate_unary_cong_endpoint_property(lc_closure):
    from bindsem.monad import unary_subst

    rng = split(55, "unary-cong")
    doc = lc_closure
    cases = 0
    while cases < 150:
        n = rng.randint(0, 2)
        base = random_term(rng, doc, n, rng.randint(1, 5))
        ds = step(base, doc, n, rules=["beta-red", "eta-exp", "app-cong1",
                                       "app-cong2", "abs-cong"])
        if not ds:
            continue
        d = ds[rng.randrange(len(ds))]
        u = random_term(rng, doc, n + 1, rng.randint(0, 7))
        image = translate_unary_cong(u, d, doc, n)
        assert image.endpoints == (
            unary_subst(u, d.source, n, doc),
            unary_subst(u, d.target, n, doc),
        )
        assert check(image, doc)
        cases += 1
