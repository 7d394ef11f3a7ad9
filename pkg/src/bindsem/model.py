"""The recursion principle: folds into models, translations between signatures.

A model supplies one action per operation; the action receives one evaluator
per argument (an evaluator maps a tuple of fresh values to the argument's
value) and returns the node's value.  A translation maps every source
operation to a target metaterm over argument metavariables, which forces the
induced map to commute with substitution by construction; an optional rule
map extends it to derivations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .equation import normalize
from .metaterm import Assignment, Fresh, MOp, MVar, eval_metaterm
from .monad import SubstMap, subst, unary_subst, weaken
from .reduction import Derivation, instantiate, subst_derivation
from .signature import (
    MetaVarDecl,
    ReductionRuleSpec,
    SigError,
    SignatureDoc,
    builtin,
    closure_pack,
)
from .terms import Op, Term, Var, arg_binders, make_op


@dataclass
class Model:
    """Fold target: per-operation actions over an opaque value domain."""

    name: str
    actions: dict[str, Callable]  # op -> f(*evaluators) -> value
    fresh_defaults: dict[str, object] = field(default_factory=dict)

    def action(self, op: str) -> Callable:
        if op not in self.actions:
            raise SigError(f"model {self.name} has no action for {op}")
        return self.actions[op]


def fold(t: Term, env: list, model: Model, doc: SignatureDoc):
    """Initial-morphism fold: variables to env, operations to model actions."""
    match t:
        case Var(i):
            return env[i]
        case Op(name, args):
            spec = doc.op(name)
            ks = arg_binders(spec, args)
            evaluators = []
            for a, k in zip(args, ks):
                def evaluator(*fresh, _a=a, _k=k):
                    if len(fresh) != _k:
                        raise SigError(
                            f"argument of {name} expects {_k} fresh values"
                        )
                    return fold(_a, env + list(fresh), model, doc)

                evaluators.append(evaluator)
            return model.action(name)(*evaluators)
    raise SigError(f"not a term: {t!r}")


def builtin_model(name: str) -> Model:
    """The three catalog models: free variables, size, redex count."""
    if name == "free_vars":
        none: frozenset = frozenset()  # a bound variable contributes nothing
        return Model(
            name="free_vars",
            actions={
                "app": lambda f, g: f() | g(),
                "abs": lambda f: f(none),
                "fix": lambda f: f(none),
                "esubst": lambda f, g: f(none) | g(),
            },
            fresh_defaults={"abs": none, "fix": none, "esubst": none},
        )
    if name == "size":
        return Model(
            name="size",
            actions={
                "app": lambda f, g: 1 + f() + g(),
                "abs": lambda f: 1 + f(0),
                "fix": lambda f: 1 + f(0),
                "esubst": lambda f, g: 1 + f(0) + g(),
            },
            fresh_defaults={"abs": 0, "fix": 0, "esubst": 0},
        )
    if name == "redex_count":
        # values are pairs (count, head-is-abstraction flag)
        return Model(
            name="redex_count",
            actions={
                "app": lambda f, g: (f()[0] + g()[0] + f()[1], 0),
                "abs": lambda f: (f((0, 0))[0], 1),
            },
            fresh_defaults={"abs": (0, 0)},
        )
    raise SigError(f"unknown builtin model {name}")


MODEL_NAMES = ("free_vars", "size", "redex_count")


# ---------------------------------------------------------------------------
# Translations

@dataclass
class Translation:
    name: str
    source: SignatureDoc
    target: SignatureDoc
    op_map: dict[str, object]  # source op -> target metaterm over A1..Ap
    rule_map: dict[str, Callable] = field(default_factory=dict)
    # each rule template: f(ctx, derivation, values, subs) -> Derivation


def translate(t: Term, tr: Translation, scope: int) -> Term:
    """Structural replacement of each source operation by its target metaterm."""
    match t:
        case Var(i):
            return Var(i)
        case Op(name, args):
            if name not in tr.op_map:
                raise SigError(f"translation {tr.name} misses operation {name}")
            spec = tr.source.op(name)
            ks = arg_binders(spec, args)
            values = {
                f"A{j + 1}": translate(a, tr, scope + k)
                for j, (a, k) in enumerate(zip(args, ks))
            }
            out = eval_metaterm(tr.op_map[name], Assignment(scope, values),
                                tr.target, 0)
            return normalize(out, tr.target, scope).result
    raise SigError(f"not a term: {t!r}")


@dataclass
class _TrCtx:
    tr: Translation

    @property
    def target(self) -> SignatureDoc:
        return self.tr.target


def translate_derivation(d: Derivation, tr: Translation) -> Derivation:
    """Map a derivation along the translation via its rule templates."""
    if d.rule not in tr.rule_map:
        raise SigError(f"translation {tr.name} misses rule {d.rule}")
    info = tr.source.info().rule_info[d.rule]
    values = {
        decl.name: translate(d.assignment.get(decl.name), tr, d.base + decl.level)
        for decl in info.rule.metavars
    }
    subs = tuple(translate_derivation(s, tr) for s in d.subs)
    return tr.rule_map[d.rule](_TrCtx(tr), d, values, subs)


def identity_template(rule_name: str) -> Callable:
    def template(ctx: _TrCtx, d: Derivation, values: dict, subs: tuple) -> Derivation:
        return instantiate(ctx.target, rule_name, Assignment(d.base, values), subs)

    return template


def refl_template(source_metaterm, level_of: dict[str, int] | None = None) -> Callable:
    """Translate a rule instance to reflexivity at its translated source."""

    def template(ctx: _TrCtx, d: Derivation, values: dict, subs: tuple) -> Derivation:
        src = eval_metaterm(source_metaterm, Assignment(d.base, values), ctx.target, 0)
        src = normalize(src, ctx.target, d.base).result
        return instantiate(ctx.target, "refl", Assignment(d.base, {"T": src}))

    return template


def trans_chain(doc: SignatureDoc, parts: list[Derivation]) -> Derivation:
    """Right-nested transitivity of consecutive derivations."""
    if not parts:
        raise SigError("empty derivation chain")
    if len(parts) == 1:
        return parts[0]
    head, rest = parts[0], trans_chain(doc, parts[1:])
    a = Assignment(
        head.base,
        {"T": head.source, "U": head.target, "W": rest.target},
    )
    return instantiate(doc, "trans", a, (head, rest))


def translate_unary_cong(u: Term, d: Derivation, closure_doc: SignatureDoc,
                         scope: int) -> Derivation:
    """A derivation between u{* := source d} and u{* := target d}.

    u lives at scope+1 with the substitution target * as its topmost variable;
    d relates two terms at `scope`.  Structural recursion on u: the fresh
    variable maps to d itself, other variables to reflexivity, operations to
    congruence composites over the recursive calls, weakening d under binders.
    """
    doc = closure_doc
    src, tgt = d.endpoints

    match u:
        case Var(i) if i == scope:
            return d
        case Var(i):
            return instantiate(doc, "refl", Assignment(scope, {"T": Var(i)}))
        case Op(name, args):
            spec = doc.op(name)
            ks = arg_binders(spec, args)
            src_args = [_subst_star(a, src, scope, k, doc) for a, k in zip(args, ks)]
            tgt_args = [_subst_star(a, tgt, scope, k, doc) for a, k in zip(args, ks)]
            # chain one congruence per argument, left to right
            parts: list[Derivation] = []
            for i, (a, k) in enumerate(zip(args, ks)):
                sub = _under_binders(a, d, k, doc, scope)
                if sub.rule == "refl" and not sub.subs:
                    continue
                cong = f"{name}-cong" if len(args) == 1 else f"{name}-cong{i + 1}"
                values = {"B": sub.target}
                for j in range(len(args)):
                    values[f"A{j + 1}"] = tgt_args[j] if j < i else src_args[j]
                parts.append(
                    instantiate(doc, cong, Assignment(scope, values), (sub,))
                )
            if not parts:
                whole = unary_subst(u, src, scope, doc)
                return instantiate(doc, "refl", Assignment(scope, {"T": whole}))
            return trans_chain(doc, parts)
    raise SigError(f"not a term: {u!r}")


def _subst_star(a: Term, value: Term, scope: int, k: int, doc: SignatureDoc) -> Term:
    """Substitute index `scope` (the *) inside a : Term@(scope+1+k), keeping binders.

    Binder variables renumber down one position; the result lives at scope+k.
    """
    images = (
        tuple(Var(i) for i in range(scope))
        + (weaken(value, k, scope, doc),)
        + tuple(Var(scope + i) for i in range(k))
    )
    return subst(a, SubstMap(scope + 1 + k, scope + k, images), doc)


def weaken_map(scope: int, k: int) -> SubstMap:
    return SubstMap(scope, scope + k, tuple(Var(i) for i in range(scope)))


def _under_binders(a: Term, d: Derivation, k: int, doc: SignatureDoc,
                   scope: int) -> Derivation:
    """Recursive call for an argument under k binders.

    The argument lives at scope+1+k with the substitution target at index
    `scope`; rotating that index to the top re-establishes the recursion
    invariant at base scope+k, with d weakened accordingly.
    """
    from .monad import rename

    if k == 0:
        return translate_unary_cong(a, d, doc, scope)
    n = scope + 1 + k
    table = list(range(scope)) + [scope + k] + [scope + i for i in range(k)]
    rotated = rename(a, table, n, n, doc)
    d_w = subst_derivation(d, weaken_map(scope, k), doc)
    return translate_unary_cong(rotated, d_w, doc, scope + k)


# ---------------------------------------------------------------------------
# Catalog signatures derived for translations

def lc_closure_doc() -> SignatureDoc:
    """Lambda calculus with beta/eta, congruences, reflexivity and transitivity."""
    return builtin("lc_beta_eta").with_rules(closure_pack())


SUBST_CONG = ReductionRuleSpec(
    name="subst-cong",
    metavars=(MetaVarDecl("C", 1), MetaVarDecl("T", 0), MetaVarDecl("T'", 0)),
    hypotheses=((0, MVar("T"), MVar("T'")),),
    conclusion=(0, MVar("C", (MVar("T"),)), MVar("C", (MVar("T'"),))),
    template_only=True,
)


def lc_1cong_doc() -> SignatureDoc:
    """Lambda calculus with beta/eta, congruences, reflexivity, and the
    congruence rule for unary substitution (a template, not searchable)."""
    return builtin("lc_beta_eta").with_rules([closure_pack()[0], SUBST_CONG])


# the fixpoint combinator: app(Y, t) reduces in two beta steps to
# app(t, app(Y, t)), which the unfolding derivation below spells out
_YHALF_MT = MOp(
    "abs",
    (MOp(
        "abs",
        (MOp(
            "app",
            (Fresh(1),
             MOp("app", (MOp("app", (Fresh(0), Fresh(0))), Fresh(1)))),
        ),),
    ),),
)
Y_COMBINATOR_MT = MOp("app", (_YHALF_MT, _YHALF_MT))


def y_combinator(doc: SignatureDoc, scope: int = 0) -> Term:
    return eval_metaterm(Y_COMBINATOR_MT, Assignment(scope), doc, 0)


def y_unfold_derivation(doc: SignatureDoc, scope: int) -> Derivation:
    """The derivation app(Y, *) => app(*, app(Y, *)) at scope+1.

    Two beta steps: the first contracts Y itself (under app-cong1), the second
    contracts the unfolded head.
    """
    half = eval_metaterm(_YHALF_MT, Assignment(scope + 1), doc, 0)
    half_body = eval_metaterm(_YHALF_MT.args[0], Assignment(scope + 1), doc, 1)
    y_term = make_op(doc, "app", [half, half])
    star = Var(scope)
    d1 = instantiate(
        doc, "beta-red", Assignment(scope + 1, {"T": half_body, "U": half})
    )
    d2 = instantiate(
        doc, "app-cong1",
        Assignment(scope + 1, {"A1": y_term, "A2": star, "B": d1.target}),
        (d1,),
    )
    unfolded = d1.target  # abs(f. app(f, app(app(Y..), f))) with Y contracted inside
    assert isinstance(unfolded, Op) and unfolded.name == "abs"
    d3 = instantiate(
        doc, "beta-red",
        Assignment(scope + 1, {"T": unfolded.args[0], "U": star}),
    )
    return trans_chain(doc, [d2, d3])


# ---------------------------------------------------------------------------
# Catalog translations

TRANSLATION_NAMES = ("lj-ll", "fix-lc", "lcex-lc1cong", "lc1cong-lcclosure")


def catalog_translation(name: str) -> Translation:
    if name == "lj-ll":
        return _lj_ll()
    if name == "fix-lc":
        return _fix_lc()
    if name == "lcex-lc1cong":
        return _lcex_lc1cong()
    if name == "lc1cong-lcclosure":
        return _lc1cong_lcclosure()
    raise SigError(f"unknown translation {name}")


def _a(j: int, level: int = 0, at: int | None = None) -> MVar:
    base = (at if at is not None else level) - level
    return MVar(f"A{j}", tuple(Fresh(base + i) for i in range(level)))


def _lj_ll() -> Translation:
    return Translation(
        name="lj-ll",
        source=builtin("lj"),
        target=builtin("ll"),
        op_map={
            "neg": MOp("lolli", (MOp("bang", (_a(1),)), MOp("zero", ()))),
            "conj": MOp("with", (_a(1), _a(2))),
            "disj": MOp("oplus", (MOp("bang", (_a(1),)), MOp("bang", (_a(2),)))),
            "impl": MOp("lolli", (MOp("bang", (_a(1),)), _a(2))),
            "forall": MOp("forall", (_a(1, 1, at=1),)),
            "exists": MOp("exists", (MOp("bang", (_a(1, 1, at=1),)),)),
        },
    )


def _identity_rule_maps(names: list[str]) -> dict[str, Callable]:
    return {n: identity_template(n) for n in names}


def _fix_lc() -> Translation:
    target = lc_closure_doc()

    def fix_exp(ctx: _TrCtx, d: Derivation, values: dict, subs: tuple) -> Derivation:
        t = values["T"]  # body at d.base + 1
        doc = ctx.target
        y = y_combinator(doc, d.base)
        abs_t = make_op(doc, "abs", [t])
        r = y_unfold_derivation(doc, d.base)
        images = tuple(Var(i) for i in range(d.base)) + (abs_t,)
        m1 = subst_derivation(r, SubstMap(d.base + 1, d.base, images), doc)
        m2 = instantiate(
            doc, "beta-red",
            Assignment(d.base, {"T": t, "U": make_op(doc, "app", [y, abs_t])}),
        )
        return trans_chain(doc, [m1, m2])

    def fix_cong(ctx: _TrCtx, d: Derivation, values: dict, subs: tuple) -> Derivation:
        doc = ctx.target
        t, t2 = values["A1"], values["B"]
        abs_d = instantiate(
            doc, "abs-cong", Assignment(d.base, {"A1": t, "B": t2}), subs
        )
        y = y_combinator(doc, d.base)
        return instantiate(
            doc, "app-cong2",
            Assignment(d.base, {
                "A1": y,
                "A2": make_op(doc, "abs", [t]),
                "B": make_op(doc, "abs", [t2]),
            }),
            (abs_d,),
        )

    rule_map = _identity_rule_maps(
        ["beta-red", "eta-exp", "app-cong1", "app-cong2", "abs-cong"]
    )
    rule_map["fix-exp"] = fix_exp
    rule_map["fix-cong"] = fix_cong
    return Translation(
        name="fix-lc",
        source=builtin("lc_fix"),
        target=target,
        op_map={
            "app": MOp("app", (_a(1), _a(2))),
            "abs": MOp("abs", (_a(1, 1, at=1),)),
            "fix": MOp("app", (Y_COMBINATOR_MT, MOp("abs", (_a(1, 1, at=1),)))),
        },
        rule_map=rule_map,
    )


def _refl_at_translated_source() -> Callable:
    def template(ctx: _TrCtx, d: Derivation, values: dict, subs: tuple) -> Derivation:
        src = translate(d.source, ctx.tr, d.base)
        return instantiate(ctx.target, "refl", Assignment(d.base, {"T": src}))

    return template


def _lcex_lc1cong() -> Translation:
    target = lc_1cong_doc()

    def esubst_cong1(ctx, d, values, subs):
        doc = ctx.target
        u = values["A2"]
        images = tuple(Var(i) for i in range(d.base)) + (u,)
        return subst_derivation(subs[0], SubstMap(d.base + 1, d.base, images), doc)

    def esubst_cong2(ctx, d, values, subs):
        doc = ctx.target
        return instantiate(
            doc, "subst-cong",
            Assignment(d.base, {"C": values["A1"], "T": values["A2"],
                                "T'": values["B"]}),
            subs,
        )

    rule_map = _identity_rule_maps(
        ["app-cong1", "app-cong2", "abs-cong"]
    )
    rule_map["beta-red"] = identity_template("beta-red")
    rule_map["esubst-cong1"] = esubst_cong1
    rule_map["esubst-cong2"] = esubst_cong2
    for name in ("gc", "var-sub", "app-sub", "abs-sub", "sub-sub"):
        rule_map[name] = _refl_at_translated_source()
    return Translation(
        name="lcex-lc1cong",
        source=builtin("lc_ex"),
        target=target,
        op_map={
            "app": MOp("app", (_a(1), _a(2))),
            "abs": MOp("abs", (_a(1, 1, at=1),)),
            "esubst": MVar("A1", (_a(2),)),
        },
        rule_map=rule_map,
    )


def _lc1cong_lcclosure() -> Translation:
    target = lc_closure_doc()

    def subst_cong(ctx, d, values, subs):
        return translate_unary_cong(values["C"], subs[0], ctx.target, d.base)

    rule_map = _identity_rule_maps(
        ["beta-red", "eta-exp", "app-cong1", "app-cong2", "abs-cong", "refl"]
    )
    rule_map["subst-cong"] = subst_cong
    return Translation(
        name="lc1cong-lcclosure",
        source=lc_1cong_doc(),
        target=target,
        op_map={
            "app": MOp("app", (_a(1), _a(2))),
            "abs": MOp("abs", (_a(1, 1, at=1),)),
        },
        rule_map=rule_map,
    )
