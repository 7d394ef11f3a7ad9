"""State terms, CBV decomposition, heterogeneous reductions, pi-calculus."""

import pytest

from bindsem import SubstMap, Var, builtin, parse_term, trace
from bindsem.equation import equal_mod
from bindsem.metaterm import MVar
from bindsem.operational import (
    StateNode,
    cbv_compose,
    cbv_decompose,
    het_check,
    het_derive,
    het_step,
    het_subst_derivation,
    het_trace,
    parse_state,
    pi_canonical,
    pi_step,
    print_state,
    state_subst,
    state_well_scoped,
)
from bindsem.random_terms import random_term, split
from bindsem.signature import SigError


@pytest.fixture(scope="module")
def cbv():
    return builtin("cbv_small")


@pytest.fixture(scope="module")
def big():
    return builtin("cbv_big")


@pytest.fixture(scope="module")
def pi():
    return builtin("pi")


# ---------------------------------------------------------------------------
# Decomposition

def test_decompose_example(cbv):
    t = parse_term("app(app(x, abs(y. y)), z)", 2, cbv, ["x", "z"])
    s = cbv_decompose(t, cbv)
    assert s == StateNode("app", (
        StateNode("app", (
            StateNode("v", (Var(0),)),
            StateNode("v", (parse_term("abs(y. y)", 2, cbv, ["x", "z"]),)),
        )),
        StateNode("v", (Var(1),)),
    ))
    assert cbv_compose(s, cbv) == t


def test_decompose_leaf_only(cbv):
    t = parse_term("abs(y. app(y, y))", 0, cbv, [])
    assert cbv_decompose(t, cbv) == StateNode("v", (t,))


def test_decompose_roundtrip_random(cbv):
    rng = split(60, "decomp")
    for _ in range(500):
        n = rng.randint(0, 3)
        t = random_term(rng, cbv, n, rng.randint(0, 8))
        s = cbv_decompose(t, cbv)
        assert cbv_compose(s, cbv) == t
        assert state_well_scoped(s, n, cbv, "state1")
        # compose . decompose is also the identity on state terms in the image
        assert cbv_decompose(cbv_compose(s, cbv), cbv) == s


def test_state_parse_print_roundtrip(cbv, pi):
    s = parse_state("app(v(abs(x. x)), v(y))", 1, cbv, "state1", ["y"])
    text = print_state(s, cbv, "state1", ["y"])
    assert parse_state(text, 1, cbv, "state1", ["y"]) == s
    p = parse_state(
        "par(out(a, b, zero()), in(a, c. out(c, c, zero())))",
        2, pi, "state1", ["a", "b"],
    )
    text_p = print_state(p, pi, "state1", ["a", "b"])
    assert parse_state(text_p, 2, pi, "state1", ["a", "b"]) == p


def test_state_subst_channels_rename_only(pi):
    s = parse_state("out(a, b, zero())", 2, pi, "state1", ["a", "b"])
    f = SubstMap(2, 2, (Var(1), Var(1)))
    assert state_subst(s, f, pi, "state1") == parse_state(
        "out(b, b, zero())", 2, pi, "state1", ["a", "b"]
    )
    t = parse_term("abs(x. x)", 2, builtin("lc"), ["a", "b"])
    with pytest.raises(SigError):
        state_subst(s, SubstMap(2, 2, (t, Var(1))), pi, "state1")


def test_state_subst_identity(cbv):
    s = parse_state("app(v(abs(x. x)), v(y))", 1, cbv, "state1", ["y"])
    assert state_subst(s, SubstMap.identity(1), cbv, "state1") == s


def test_state_subst_commutes_with_embedding(cbv):
    """Substituting values commutes with decompose/compose."""
    from bindsem import subst

    from bindsem.terms import make_op

    rng = split(61, "state-subst")
    for _ in range(300):
        n, m = rng.randint(0, 3), rng.randint(0, 3)
        t = random_term(rng, cbv, n, rng.randint(0, 7))
        # value images only: variables or abstractions
        images = []
        for _ in range(n):
            if m > 0 and rng.random() < 0.5:
                images.append(Var(rng.randrange(m)))
            else:
                body = random_term(rng, cbv, m + 1, rng.randint(0, 4))
                images.append(make_op(cbv, "abs", [body]))
        f = SubstMap(n, m, tuple(images))
        assert state_subst(cbv_decompose(t, cbv), f, cbv, "state1") == \
            cbv_decompose(subst(t, f, cbv), cbv)


# ---------------------------------------------------------------------------
# CBV small-step

def test_cbv_small_beta(cbv):
    s = parse_state("app(v(abs(x. x)), v(abs(q. q)))", 0, cbv, "state1", [])
    ds = het_step(s, cbv, 0)
    assert [d.rule for d in ds] == ["beta"]
    val = parse_term("abs(q. q)", 0, cbv, [])
    assert ds[0].target == cbv_decompose(val, cbv)
    assert het_check(ds[0], cbv)


def test_cbv_small_beta_target_is_decomposition(cbv):
    # app(v(abs(x. x x)), v(u)) steps to decompose((x x){x := u})
    s = parse_state(
        "app(v(abs(x. app(x, x))), v(abs(q. q)))", 0, cbv, "state1", []
    )
    ds = [d for d in het_step(s, cbv, 0) if d.rule == "beta"]
    u = parse_term("abs(q. q)", 0, cbv, [])
    expected = cbv_decompose(parse_term("app(abs(q. q), abs(q. q))", 0, cbv, []), cbv)
    assert ds[0].target == expected


def test_cbv_small_congruences(cbv):
    s = parse_state(
        "app(app(v(abs(x. x)), v(abs(q. q))), v(y))", 1, cbv, "state1", ["y"]
    )
    ds = het_step(s, cbv, 1)
    assert [d.rule for d in ds] == ["app-cong1"]
    assert ds[0].target == parse_state(
        "app(v(abs(q. q)), v(y))", 1, cbv, "state1", ["y"]
    )
    assert het_check(ds[0], cbv)


def test_cbv_small_abs_cong(cbv):
    t = parse_term("abs(x. app(abs(z. z), x))", 0, cbv, [])
    s = cbv_decompose(t, cbv)
    ds = het_step(s, cbv, 0)
    assert [d.rule for d in ds] == ["abs-cong"]
    assert ds[0].target == cbv_decompose(parse_term("abs(x. x)", 0, cbv, []), cbv)
    assert het_check(ds[0], cbv)


def test_cbv_value_substitution_stability(cbv):
    rng = split(62, "het-subst")
    from bindsem import subst

    cases = 0
    while cases < 200:
        n = rng.randint(0, 2)
        t = random_term(rng, cbv, n, rng.randint(1, 6))
        s = cbv_decompose(t, cbv)
        ds = het_step(s, cbv, n)
        if not ds:
            continue
        d = ds[rng.randrange(len(ds))]
        m = rng.randint(0, 2)
        images = []
        for _ in range(n):
            if m > 0 and rng.random() < 0.5:
                images.append(Var(rng.randrange(m)))
            else:
                from bindsem.terms import make_op

                images.append(
                    make_op(cbv, "abs", [random_term(rng, cbv, m + 1, rng.randint(0, 3))])
                )
        f = SubstMap(n, m, tuple(images))
        d2 = het_subst_derivation(d, f, cbv)
        assert het_check(d2, cbv)
        assert d2.endpoints == (
            state_subst(d.source, f, cbv, "state1"),
            state_subst(d.target, f, cbv, "state2"),
        )
        cases += 1


# ---------------------------------------------------------------------------
# CBV big-step

def test_cbv_big_value_axiom(big):
    s = parse_state("v(abs(x. x))", 0, big, "state1", [])
    res = het_derive(s, MVar("V"), big, 0, depth=4)
    assert [d.rule for d in res.derivations] == ["val"]
    assert res.derivations[0].target == StateNode(
        "w", (parse_term("abs(x. x)", 0, big, []),)
    )


def test_cbv_big_beta_example(big):
    t = parse_term("app(abs(x. x), abs(q. q))", 0, big, [])
    res = het_derive(cbv_decompose(t, big), MVar("V"), big, 0, depth=16)
    assert len(res.derivations) == 1
    d = res.derivations[0]
    assert d.rule == "beta"
    assert d.target == StateNode("w", (parse_term("abs(q. q)", 0, big, []),))
    assert het_check(d, big)


def test_cbv_big_agrees_with_small_step_normalization(big, cbv):
    """Big-step values match the beta-only normal form on closed terms."""
    from bindsem import parse_signature

    beta_doc = builtin("lc").with_rules(
        [r for r in builtin("lc_beta_eta").rules if r.name != "eta-exp"]
    )
    beta_eq = parse_signature(
        "op app 2 0 0;\nop abs 1 1;\n"
        "eq beta meta T:1 U:0 : app(abs(x. T), U) = T[*1:=U] rewrite;\n"
    )
    rng = split(63, "bigsmall")
    agreed = 0
    attempts = 0
    while agreed < 200 and attempts < 4000:
        attempts += 1
        t = random_term(rng, big, 0, rng.randint(1, 7))
        tr = trace(t, beta_doc, 0, max_steps=50)
        if tr.truncated or (tr.steps and tr.steps[-1].target is None):
            continue
        nf = tr.steps[-1].target if tr.steps else t
        from bindsem.terms import Op

        if not (isinstance(nf, Op) and nf.name == "abs"):
            continue
        res = het_derive(cbv_decompose(t, big), MVar("V"), big, 0,
                         depth=40, max_steps=10**5)
        if not res.derivations:
            continue  # CBV may diverge where normal order terminates
        value = res.derivations[0].target
        assert value.name == "w"
        composed = value.args[0]
        assert equal_mod(composed, nf, beta_eq, 0)
        agreed += 1
    assert agreed == 200


def test_het_trace_small_step(cbv):
    t = parse_term("app(abs(x. x), app(abs(y. y), abs(q. q)))", 0, cbv, [])
    tr = het_trace(cbv_decompose(t, cbv), cbv, 0)
    assert tr.steps and not tr.truncated
    assert tr.final == cbv_decompose(parse_term("abs(q. q)", 0, cbv, []), cbv)
    for a, b in zip(tr.steps, tr.steps[1:]):
        assert a.target == b.source


def test_het_trace_pi_uses_comm(pi):
    s = parse_state(
        "par(out(a, b, zero()), in(a, c. out(c, c, zero())))",
        2, pi, "state1", ["a", "b"],
    )
    tr = het_trace(s, pi, 2)
    assert [d.rule for d in tr.steps] == ["comm"]
    assert tr.final == parse_state("out(b, b, zero())", 2, pi, "state1", ["a", "b"])


# ---------------------------------------------------------------------------
# pi-calculus

def test_pi_canonical_drops_zero(pi):
    s = parse_state("par(zero(), out(a, b, zero()))", 2, pi, "state1", ["a", "b"])
    assert pi_canonical(s, pi, 2) == parse_state(
        "out(a, b, zero())", 2, pi, "state1", ["a", "b"]
    )


def test_pi_canonical_sorts_parallel(pi):
    ab = parse_state(
        "par(out(a, b, zero()), in(a, c. zero()))", 2, pi, "state1", ["a", "b"]
    )
    ba = parse_state(
        "par(in(a, c. zero()), out(a, b, zero()))", 2, pi, "state1", ["a", "b"]
    )
    assert pi_canonical(ab, pi, 2) == pi_canonical(ba, pi, 2)


def test_pi_scope_extrusion(pi):
    s = parse_state(
        "par(nu(c. out(c, a, zero())), in(a, d. zero()))", 1, pi, "state1", ["a"]
    )
    got = pi_canonical(s, pi, 1)
    assert got.name == "nu"
    # the restricted name floats over the composition, capture avoided
    assert got == parse_state(
        "nu(c. par(in(a, d. zero()), out(c, a, zero())))", 1, pi, "state1", ["a"]
    )


def test_pi_canonical_idempotent_and_permutation_invariant(pi):
    from bindsem.operational import _par_fold

    rng = split(64, "pi-canon")
    pool = [
        "zero()",
        "out(a, b, zero())",
        "in(a, c. out(c, c, zero()))",
        "bang(in(b, c. zero()))",
        "nu(c. out(c, c, zero()))",
        "par(out(b, a, zero()), in(b, c. zero()))",
    ]
    for _ in range(500):
        comps = [
            parse_state(rng.choice(pool), 2, pi, "state1", ["a", "b"])
            for _ in range(rng.randint(1, 4))
        ]
        s = _par_fold(comps)
        canon = pi_canonical(s, pi, 2)
        assert pi_canonical(canon, pi, 2) == canon
        perm = list(comps)
        rng.shuffle(perm)
        assert pi_canonical(_par_fold(perm), pi, 2) == canon


def test_pi_comm_example(pi):
    s = parse_state(
        "par(out(a, b, zero()), in(a, c. out(c, c, zero())))",
        2, pi, "state1", ["a", "b"],
    )
    steps = pi_step(s, pi, 2)
    assert len(steps) == 1
    d = steps[0]
    assert d.target == parse_state("out(b, b, zero())", 2, pi, "state1", ["a", "b"])
    assert het_check(d, pi)


def test_pi_comm_under_restriction(pi):
    s = parse_state(
        "nu(c. par(out(c, a, zero()), in(c, d. out(d, d, zero()))))",
        1, pi, "state1", ["a"],
    )
    steps = pi_step(s, pi, 1)
    assert len(steps) == 1
    d = steps[0]
    assert d.rule == "nu-cong"
    assert d.target == parse_state(
        "nu(c. out(a, a, zero()))", 1, pi, "state1", ["a"]
    )
    assert het_check(d, pi)


def test_pi_no_steps_on_nil(pi):
    s = parse_state("zero()", 0, pi, "state1", [])
    assert pi_step(s, pi, 0) == []


def test_pi_channel_mismatch_blocks_comm(pi):
    s = parse_state(
        "par(out(a, a, zero()), in(b, c. zero()))", 2, pi, "state1", ["a", "b"]
    )
    assert pi_step(s, pi, 2) == []


def test_pi_replication_unfolds(pi):
    s = parse_state(
        "par(bang(out(a, a, zero())), in(a, c. zero()))", 1, pi, "state1", ["a"]
    )
    steps = pi_step(s, pi, 1, budget=1)
    assert steps  # the !P component contributed a copy for communication
    for d in steps:
        assert het_check(d, pi)


def test_pi_par_cong_keeps_bystander(pi):
    s = parse_state(
        "par(par(out(a, b, zero()), in(a, c. zero())), bang(zero()))",
        2, pi, "state1", ["a", "b"],
    )
    steps = pi_step(s, pi, 2)
    assert steps
    d = steps[0]
    assert d.rule == "par-cong"
    assert het_check(d, pi)
    assert d.target == pi_canonical(
        parse_state("par(zero(), bang(zero()))", 2, pi, "state1", ["a", "b"]),
        pi, 2,
    )
