"""Signature documents: declaration, parsing, validation, combination, rule packs.

A signature document declares the operations of a language (with binding
arities and argument-collection discipline), equations between metaterms,
reduction rules, and optionally a pair of state functors for heterogeneous
reductions.  Validation is staged: operations first, then equations over the
operations, then rules over both.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .metaterm import Fresh, MOp, MVar, SEmbed, SOp, metavars_of, is_pattern, msubst_fresh


class SigError(Exception):
    """Signature-file syntax or reference error, with position when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Domain types

@dataclass(frozen=True)
class OperationSpec:
    name: str
    binders: tuple[int, ...]
    collection: str = "ordered"  # ordered | sorted | sorted-dedup
    variadic: bool = False


@dataclass(frozen=True)
class MetaVarDecl:
    name: str
    level: int
    uses_fresh: frozenset[int] = frozenset()


@dataclass(frozen=True)
class EquationSpec:
    name: str
    metavars: tuple[MetaVarDecl, ...]
    level: int
    lhs: object
    rhs: object
    mode: str = "rewrite-lr"  # rewrite-lr | canonical
    hook: str | None = None


@dataclass(frozen=True)
class ReductionRuleSpec:
    name: str
    metavars: tuple[MetaVarDecl, ...]
    hypotheses: tuple[tuple[int, object, object], ...]  # (level, src, tgt)
    conclusion: tuple[int, object, object]
    template_only: bool = False

    def decl(self, name: str) -> MetaVarDecl:
        for d in self.metavars:
            if d.name == name:
                return d
        raise SigError(f"rule {self.name}: undeclared metavariable {name}")


@dataclass(frozen=True)
class SlotSpec:
    kind: str  # base | term | state
    level: int = 0


@dataclass(frozen=True)
class StateOpSpec:
    name: str
    slots: tuple[SlotSpec, ...]


@dataclass(frozen=True)
class EmbedSpec:
    name: str
    split_op: str  # monad operation split into state nodes
    node_op: str  # state operation receiving the split
    leaf_op: str  # state operation wrapping the leaves


@dataclass(frozen=True)
class StateFunctorSpec:
    name: str
    ops: tuple[StateOpSpec, ...]
    embeds: tuple[EmbedSpec, ...] = ()

    def op(self, name: str) -> StateOpSpec:
        for o in self.ops:
            if o.name == name:
                return o
        raise SigError(f"state functor {self.name} has no operation {name}")

    @property
    def ops_by_name(self) -> dict[str, StateOpSpec]:
        return {o.name: o for o in self.ops}

    @property
    def embeds_by_name(self) -> dict[str, EmbedSpec]:
        return {e.name: e for e in self.embeds}


@dataclass(eq=False)
class SignatureDoc:
    ops: tuple[OperationSpec, ...] = ()
    equations: tuple[EquationSpec, ...] = ()
    rules: tuple[ReductionRuleSpec, ...] = ()
    state: tuple[StateFunctorSpec, StateFunctorSpec] | None = None
    state_canonicalizer: str | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignatureDoc):
            return NotImplemented
        return (
            self.ops == other.ops
            and self.equations == other.equations
            and self.rules == other.rules
            and self.state == other.state
            and self.state_canonicalizer == other.state_canonicalizer
        )

    @property
    def ops_by_name(self) -> dict[str, OperationSpec]:
        if "ops_by_name" not in self._cache:
            self._cache["ops_by_name"] = {o.name: o for o in self.ops}
        return self._cache["ops_by_name"]

    def op(self, name: str) -> OperationSpec:
        spec = self.ops_by_name.get(name)
        if spec is None:
            raise SigError(f"unknown operation {name}")
        return spec

    def rule(self, name: str) -> ReductionRuleSpec:
        for r in self.rules:
            if r.name == name:
                return r
        raise SigError(f"unknown rule {name}")

    def equation(self, name: str) -> EquationSpec:
        for e in self.equations:
            if e.name == name:
                return e
        raise SigError(f"unknown equation {name}")

    def with_rules(self, extra_rules) -> "SignatureDoc":
        return SignatureDoc(
            ops=self.ops,
            equations=self.equations,
            rules=self.rules + tuple(extra_rules),
            state=self.state,
            state_canonicalizer=self.state_canonicalizer,
        )

    def info(self) -> "DocInfo":
        if "info" not in self._cache:
            report = validate(self)
            if not report.accepted:
                raise SigError(
                    "signature rejected:\n" + "\n".join(
                        f"  {item.subject}: {item.message}" for item in report.failures
                    )
                )
            self._cache["info"] = report.info
        return self._cache["info"]


# ---------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class ReportItem:
    stage: str
    subject: str
    ok: bool
    message: str = ""


@dataclass(frozen=True)
class RuleInfo:
    rule: ReductionRuleSpec  # normalized form (conclusion at level 0)
    sorts: dict[str, tuple[str, int]]  # metavar -> (kind, level); kind: term|state1|state2
    searchable: bool
    always_applicable: bool  # conclusion source is a bare metavariable


@dataclass
class DocInfo:
    rule_info: dict[str, RuleInfo]
    metavar_sorts_eq: dict[str, dict[str, tuple[str, int]]]


@dataclass
class ValidationReport:
    items: list[ReportItem]
    info: DocInfo

    @property
    def accepted(self) -> bool:
        return all(item.ok for item in self.items)

    @property
    def failures(self) -> list[ReportItem]:
        return [item for item in self.items if not item.ok]

    def render(self) -> str:
        lines = []
        for item in self.items:
            status = "pass" if item.ok else "FAIL"
            msg = f" ({item.message})" if item.message else ""
            lines.append(f"[{status}] {item.stage}: {item.subject}{msg}")
        verdict = "accepted" if self.accepted else "rejected"
        lines.append(f"signature {verdict}")
        return "\n".join(lines)


KNOWN_HOOKS = {"sort-args", "sort-dedup-args", "pi-struct", "esubst-commute"}


class _SortCtx:
    """Accumulates metavariable sort constraints and reports conflicts.

    When the two state functors are structurally equal, a metavariable may
    appear on the source and the target side alike, so both sides share one
    sort.
    """

    def __init__(self, decls: dict[str, int], symmetric_state: bool = False):
        self.decls = decls
        self.symmetric = symmetric_state
        self.sorts: dict[str, tuple[str, int]] = {}
        self.errors: list[str] = []

    def require(self, name: str, kind: str):
        if self.symmetric and kind == "state2":
            kind = "state1"
        if name not in self.decls:
            self.errors.append(f"unbound metavariable {name}")
            return
        level = self.decls[name]
        sort = (kind, level)
        old = self.sorts.setdefault(name, sort)
        if old != sort:
            self.errors.append(
                f"metavariable {name} used both as {old[0]} and {kind}"
            )


def _check_metaterm(mt, doc: SignatureDoc, decls: dict[str, int], level: int,
                    ctx: _SortCtx, errors: list[str]) -> None:
    """Well-formedness of a monad metaterm at the given level."""
    match mt:
        case Fresh(i):
            if not 0 <= i < level:
                errors.append(f"fresh slot *{i + 1} above level {level}")
        case MOp(name, args):
            spec = doc.ops_by_name.get(name)
            if spec is None:
                errors.append(f"unknown operation {name}")
                return
            from .terms import arg_binders

            if not spec.variadic and len(args) != len(spec.binders):
                errors.append(f"operation {name} expects {len(spec.binders)} args")
                return
            for a, k in zip(args, arg_binders(spec, args)):
                _check_metaterm(a, doc, decls, level + k, ctx, errors)
        case MVar(name, subs):
            if name not in decls:
                errors.append(f"unbound metavariable {name}")
                return
            ctx.require(name, "term")
            if len(subs) != decls[name]:
                errors.append(
                    f"metavariable {name} has level {decls[name]}, given {len(subs)} slots"
                )
            for s in subs:
                _check_metaterm(s, doc, decls, level, ctx, errors)
        case _:
            errors.append(f"state construct in monad position: {mt!r}")


def _check_state_metaterm(mt, doc: SignatureDoc, functor: StateFunctorSpec, side: str,
                          decls: dict[str, int], level: int, ctx: _SortCtx,
                          errors: list[str]) -> None:
    match mt:
        case SOp(name, args):
            spec = functor.ops_by_name.get(name)
            if spec is None:
                errors.append(f"unknown state operation {name} in {functor.name}")
                return
            if len(args) != len(spec.slots):
                errors.append(f"state operation {name} expects {len(spec.slots)} slots")
                return
            for a, slot in zip(args, spec.slots):
                if slot.kind == "base":
                    _check_metaterm(a, doc, decls, level, ctx, errors)
                elif slot.kind == "term":
                    _check_metaterm(a, doc, decls, level + slot.level, ctx, errors)
                else:
                    _check_state_metaterm(
                        a, doc, functor, side, decls, level + slot.level, ctx, errors
                    )
        case SEmbed(name, arg):
            if name not in functor.embeds_by_name:
                errors.append(f"unknown embedding {name} in {functor.name}")
            _check_metaterm(arg, doc, decls, level, ctx, errors)
        case MVar(name, subs):
            if name not in decls:
                errors.append(f"unbound metavariable {name}")
                return
            ctx.require(name, side)
            if len(subs) != decls[name]:
                errors.append(
                    f"metavariable {name} has level {decls[name]}, given {len(subs)} slots"
                )
            for s in subs:
                _check_metaterm(s, doc, decls, level, ctx, errors)
        case _:
            errors.append(f"monad construct in state position: {mt!r}")


def _endpoint_check(doc: SignatureDoc, decls, level, src, tgt, ctx, errors):
    if doc.state is None:
        _check_metaterm(src, doc, decls, level, ctx, errors)
        _check_metaterm(tgt, doc, decls, level, ctx, errors)
    else:
        t1, t2 = doc.state
        _check_state_metaterm(src, doc, t1, "state1", decls, level, ctx, errors)
        _check_state_metaterm(tgt, doc, t2, "state2", decls, level, ctx, errors)


def _pattern_metavars(mt) -> set[str] | None:
    """Metavariables bindable by matching mt, or None when mt is not a pattern.

    State patterns may repeat a metavariable (pi channels bind with an equality
    check); monad patterns must be linear Miller patterns.
    """
    ok = True
    seen: list[str] = []

    def go(mt, in_state: bool):
        nonlocal ok
        match mt:
            case Fresh(_):
                pass
            case MVar(name, subs):
                slots = [s.index for s in subs if isinstance(s, Fresh)]
                if len(slots) != len(subs) or len(set(slots)) != len(slots):
                    ok = False
                if name in seen and not in_state:
                    ok = False
                seen.append(name)
            case MOp(_, args):
                for a in args:
                    go(a, False)
            case SOp(_, args):
                for a in args:
                    go(a, True)
            case SEmbed(_, arg):
                go(arg, True)
            case _:
                ok = False

    go(mt, isinstance(mt, (SOp, SEmbed)))
    return set(seen) if ok else None


def validate(doc: SignatureDoc) -> ValidationReport:
    """Staged validation: operations, equations over them, rules over both.

    Report-valued: every item carries pass/fail with a reason; the document is
    accepted iff all items pass.
    """
    items: list[ReportItem] = []
    info = DocInfo(rule_info={}, metavar_sorts_eq={})

    # stage 1: operations
    seen_ops: set[str] = set()
    for op in doc.ops:
        errs = []
        if op.name in seen_ops:
            errs.append("duplicate name")
        seen_ops.add(op.name)
        if any(b < 0 for b in op.binders):
            errs.append("negative binder count")
        if op.variadic and len(op.binders) != 1:
            errs.append("variadic operation needs exactly one binder entry")
        if op.collection not in ("ordered", "sorted", "sorted-dedup"):
            errs.append(f"unknown collection {op.collection}")
        if op.collection != "ordered" and not op.variadic and len(set(op.binders)) > 1:
            errs.append("sorted arguments must be interchangeable (equal binders)")
        items.append(ReportItem("ops", op.name, not errs, "; ".join(errs)))

    if doc.state is not None:
        for functor in doc.state:
            errs = []
            names = set()
            for sop in functor.ops:
                if sop.name in names:
                    errs.append(f"duplicate state op {sop.name}")
                names.add(sop.name)
                for slot in sop.slots:
                    if slot.kind not in ("base", "term", "state"):
                        errs.append(f"bad slot kind {slot.kind}")
                    if slot.level < 0:
                        errs.append("negative slot level")
            for emb in functor.embeds:
                if emb.split_op not in doc.ops_by_name:
                    errs.append(f"embed {emb.name}: unknown monad op {emb.split_op}")
                if emb.node_op not in names or emb.leaf_op not in names:
                    errs.append(f"embed {emb.name}: unknown state op")
            items.append(ReportItem("state", functor.name, not errs, "; ".join(errs)))

    symmetric = doc.state is not None and doc.state[0].ops == doc.state[1].ops

    # stage 2: equations
    seen_eq: set[str] = set()
    for eq in doc.equations:
        errs: list[str] = []
        if eq.name in seen_eq:
            errs.append("duplicate name")
        seen_eq.add(eq.name)
        decls = {d.name: d.level for d in eq.metavars}
        if len(decls) != len(eq.metavars):
            errs.append("duplicate metavariable")
        ctx = _SortCtx(decls, symmetric)
        _check_metaterm(eq.lhs, doc, decls, eq.level, ctx, errs)
        _check_metaterm(eq.rhs, doc, decls, eq.level, ctx, errs)
        errs.extend(ctx.errors)
        if eq.mode == "rewrite-lr":
            if not is_pattern(eq.lhs):
                errs.append("rewrite left-hand side is not a pattern")
            if not metavars_of(eq.rhs) <= metavars_of(eq.lhs):
                errs.append("right-hand side mentions metavariables absent from the left")
        elif eq.mode == "canonical":
            if eq.hook not in KNOWN_HOOKS:
                errs.append(f"unknown canonicalizer hook {eq.hook}")
        else:
            errs.append(f"unknown equation mode {eq.mode}")
        info.metavar_sorts_eq[eq.name] = ctx.sorts
        items.append(ReportItem("equations", eq.name, not errs, "; ".join(errs)))

    if doc.state_canonicalizer is not None and doc.state_canonicalizer not in KNOWN_HOOKS:
        items.append(
            ReportItem("state", "canonicalizer", False,
                       f"unknown hook {doc.state_canonicalizer}")
        )

    # stage 3: rules
    seen_rules: set[str] = set()
    for rule in doc.rules:
        errs = []
        if rule.name in seen_rules or rule.name in seen_eq:
            errs.append("duplicate name")
        seen_rules.add(rule.name)
        decls = {d.name: d.level for d in rule.metavars}
        if len(decls) != len(rule.metavars):
            errs.append("duplicate metavariable")
        for d in rule.metavars:
            if any(s >= d.level or s < 0 for s in d.uses_fresh):
                errs.append(f"uses-fresh slot out of range for {d.name}")
        ctx = _SortCtx(decls, symmetric)
        ncon, csrc, ctgt = rule.conclusion
        _endpoint_check(doc, decls, ncon, csrc, ctgt, ctx, errs)
        for (nh, hsrc, htgt) in rule.hypotheses:
            _endpoint_check(doc, decls, nh, hsrc, htgt, ctx, errs)
        errs.extend(ctx.errors)

        # declared metavariables must occur somewhere in the rule
        occurring = metavars_of(csrc) | metavars_of(ctgt)
        for (_, hsrc, htgt) in rule.hypotheses:
            occurring |= metavars_of(hsrc) | metavars_of(htgt)
        unused = set(decls) - occurring
        if unused:
            errs.append(f"unbound metavariable: {', '.join(sorted(unused))}")

        # declaration-order binding discipline decides searchability only;
        # rules that fail it remain usable for checking and as templates
        notes: list[str] = []
        searchable = True
        bound = _pattern_metavars(csrc)
        if bound is None:
            searchable = False
            notes.append("conclusion source is not a pattern")
            bound = metavars_of(csrc)
        for (nh, hsrc, htgt) in rule.hypotheses:
            if not metavars_of(hsrc) <= bound:
                searchable = False
                notes.append("hypothesis source is not determined in declaration order")
            new = metavars_of(htgt) - bound
            if new and _pattern_metavars(htgt) is None:
                searchable = False
                notes.append("hypothesis target is neither determined nor a pattern")
            bound |= new
        if not metavars_of(ctgt) <= bound | metavars_of(csrc):
            searchable = False
        if rule.template_only:
            searchable = False

        normalized = normalize_rule(rule)
        always = isinstance(csrc, MVar) and all(
            isinstance(s, Fresh) for s in csrc.subs
        )
        info.rule_info[rule.name] = RuleInfo(
            rule=normalized,
            sorts=ctx.sorts,
            searchable=searchable and not errs,
            always_applicable=always,
        )
        message = "; ".join(errs) if errs else (
            "not searchable: " + "; ".join(notes) if notes else ""
        )
        items.append(ReportItem("rules", rule.name, not errs, message))

    return ValidationReport(items=items, info=info)


# ---------------------------------------------------------------------------
# Derived rule packs and rule normalization

def congruence_pack(doc: SignatureDoc) -> list[ReductionRuleSpec]:
    """One rule per operation argument, propagating reductions into subterms."""
    rules = []
    for op in doc.ops:
        if op.variadic:
            continue  # no finite congruence pack for variadic collections
        p = len(op.binders)
        for i, k in enumerate(op.binders):
            name = f"{op.name}-cong" if p == 1 else f"{op.name}-cong{i + 1}"
            metavars = [MetaVarDecl(f"A{j + 1}", kj) for j, kj in enumerate(op.binders)]
            metavars.append(MetaVarDecl("B", k))
            left = [_ident_mvar(f"A{j + 1}", kj) for j, kj in enumerate(op.binders)]
            right = list(left)
            right[i] = _ident_mvar("B", k)
            hyp = (k, _ident_mvar(f"A{i + 1}", k, at_level=k), _ident_mvar("B", k, at_level=k))
            rules.append(
                ReductionRuleSpec(
                    name=name,
                    metavars=tuple(metavars),
                    hypotheses=(hyp,),
                    conclusion=(0, MOp(op.name, tuple(left)), MOp(op.name, tuple(right))),
                )
            )
    return rules


def _ident_mvar(name: str, level: int, at_level: int | None = None) -> MVar:
    """M with the identity substitution over the innermost `level` fresh slots."""
    base = (at_level if at_level is not None else level) - level
    return MVar(name, tuple(Fresh(base + i) for i in range(level)))


def closure_pack() -> list[ReductionRuleSpec]:
    """Reflexivity and transitivity, as in the standard rule catalog."""
    refl = ReductionRuleSpec(
        name="refl",
        metavars=(MetaVarDecl("T", 0),),
        hypotheses=(),
        conclusion=(0, MVar("T"), MVar("T")),
    )
    trans = ReductionRuleSpec(
        name="trans",
        metavars=(MetaVarDecl("T", 0), MetaVarDecl("U", 0), MetaVarDecl("W", 0)),
        hypotheses=(
            (0, MVar("T"), MVar("U")),
            (0, MVar("U"), MVar("W")),
        ),
        conclusion=(0, MVar("T"), MVar("W")),
    )
    return [refl, trans]


def normalize_rule(rule: ReductionRuleSpec) -> ReductionRuleSpec:
    """Lower the conclusion to level 0 by uncurrying its fresh slots.

    New level-0 metavariables are appended and substituted for every ambient
    fresh slot of the conclusion endpoints; hypotheses are unchanged.  The
    operation is idempotent.
    """
    n, src, tgt = rule.conclusion
    if n == 0:
        return rule
    existing = {d.name for d in rule.metavars}
    fresh_names = []
    i = 1
    while len(fresh_names) < n:
        cand = f"V{i}"
        if cand not in existing:
            fresh_names.append(cand)
        i += 1
    replacements = [MVar(nm) for nm in fresh_names]
    return ReductionRuleSpec(
        name=rule.name,
        metavars=rule.metavars + tuple(MetaVarDecl(nm, 0) for nm in fresh_names),
        hypotheses=rule.hypotheses,
        conclusion=(
            0,
            msubst_fresh(src, replacements, n),
            msubst_fresh(tgt, replacements, n),
        ),
        template_only=rule.template_only,
    )


# ---------------------------------------------------------------------------
# Coproduct

def coproduct(a: SignatureDoc, b: SignatureDoc,
              rename: dict[str, str] | None = None) -> SignatureDoc:
    """Component-wise union; names must be disjoint unless a rename map is given."""
    if rename:
        b = rename_doc(b, rename)
    clashes = (
        {o.name for o in a.ops} & {o.name for o in b.ops}
        | {e.name for e in a.equations} & {e.name for e in b.equations}
        | {r.name for r in a.rules} & {r.name for r in b.rules}
    )
    if clashes:
        raise SigError(f"name clash in coproduct: {', '.join(sorted(clashes))}")
    if a.state is not None and b.state is not None:
        raise SigError("cannot combine two stateful signatures")
    if (a.state_canonicalizer and b.state_canonicalizer
            and a.state_canonicalizer != b.state_canonicalizer):
        raise SigError("conflicting state canonicalizers")
    return SignatureDoc(
        ops=a.ops + b.ops,
        equations=a.equations + b.equations,
        rules=a.rules + b.rules,
        state=a.state or b.state,
        state_canonicalizer=a.state_canonicalizer or b.state_canonicalizer,
    )


def rename_doc(doc: SignatureDoc, table: dict[str, str]) -> SignatureDoc:
    """Rename operations/equations/rules; metaterm references follow."""

    def rn(name: str) -> str:
        return table.get(name, name)

    def rn_mt(mt):
        match mt:
            case Fresh(_):
                return mt
            case MOp(name, args):
                return MOp(rn(name), tuple(rn_mt(x) for x in args))
            case MVar(name, subs):
                return MVar(name, tuple(rn_mt(s) for s in subs))
            case SOp(name, args):
                return SOp(name, tuple(rn_mt(x) for x in args))
            case SEmbed(name, arg):
                return SEmbed(name, rn_mt(arg))
        raise SigError(f"not a metaterm: {mt!r}")

    ops = tuple(
        OperationSpec(rn(o.name), o.binders, o.collection, o.variadic) for o in doc.ops
    )
    eqs = tuple(
        EquationSpec(rn(e.name), e.metavars, e.level, rn_mt(e.lhs), rn_mt(e.rhs),
                     e.mode, e.hook)
        for e in doc.equations
    )
    rules = tuple(
        ReductionRuleSpec(
            rn(r.name),
            r.metavars,
            tuple((n, rn_mt(s), rn_mt(t)) for (n, s, t) in r.hypotheses),
            (r.conclusion[0], rn_mt(r.conclusion[1]), rn_mt(r.conclusion[2])),
            r.template_only,
        )
        for r in doc.rules
    )
    return SignatureDoc(ops=ops, equations=eqs, rules=rules, state=doc.state,
                        state_canonicalizer=doc.state_canonicalizer)


EMPTY = SignatureDoc()


# ---------------------------------------------------------------------------
# Signature-file grammar

_SIG_TOKEN = re.compile(
    r"~>|=>|:=|!\*|[A-Za-z_][A-Za-z0-9_'-]*|\d+|[;:,()\[\]{}.=@*]"
)

class _SigTokens:
    def __init__(self, text: str):
        self.toks: list[tuple[str, int, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0]
            pos = 0
            while pos < len(body):
                if body[pos].isspace():
                    pos += 1
                    continue
                m = _SIG_TOKEN.match(body, pos)
                if m is None:
                    raise SigError(f"unexpected character {body[pos]!r}", lineno, pos + 1)
                self.toks.append((m.group(0), lineno, pos + 1))
                pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def loc(self) -> tuple[int, int]:
        if self.i < len(self.toks):
            _, line, col = self.toks[self.i]
            return line, col
        if self.toks:
            _, line, col = self.toks[-1]
            return line, col
        return 1, 1

    def next(self) -> str:
        if self.i >= len(self.toks):
            raise SigError("unexpected end of input", *self.loc())
        tok = self.toks[self.i][0]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        line, col = self.loc()
        got = self.next()
        if got != tok:
            raise SigError(f"expected {tok!r}, got {got!r}", line, col)

    def number(self) -> int:
        line, col = self.loc()
        tok = self.next()
        if not tok.isdigit():
            raise SigError(f"expected a number, got {tok!r}", line, col)
        return int(tok)

    def ident(self) -> str:
        line, col = self.loc()
        tok = self.next()
        if not re.match(r"[A-Za-z_][A-Za-z0-9_'-]*$", tok):
            raise SigError(f"expected an identifier, got {tok!r}", line, col)
        return tok

    def done(self) -> bool:
        return self.i >= len(self.toks)


class _SigParser:
    def __init__(self, text: str):
        self.toks = _SigTokens(text)
        self.ops: list[OperationSpec] = []
        self.equations: list[EquationSpec] = []
        self.rules: list[ReductionRuleSpec] = []
        self.functors: list[StateFunctorSpec] = []
        self.canon: str | None = None

    def parse(self) -> SignatureDoc:
        while not self.toks.done():
            head = self.toks.next()
            if head == "op":
                self._op()
            elif head == "eq":
                self._eq()
            elif head == "rule":
                self._rule()
            elif head == "state":
                self._state()
            elif head == "canon":
                self.canon = self.toks.ident()
                self.toks.expect(";")
            else:
                raise SigError(f"unknown statement {head!r}", *self.toks.loc())
        state = None
        if self.functors:
            if len(self.functors) != 2:
                raise SigError("state declarations need exactly two functors")
            state = (self.functors[0], self.functors[1])
        return SignatureDoc(
            ops=tuple(self.ops),
            equations=tuple(self.equations),
            rules=tuple(self.rules),
            state=state,
            state_canonicalizer=self.canon,
        )

    # -- statements

    def _op(self):
        name = self.toks.ident()
        count = self.toks.number()
        binders = tuple(self.toks.number() for _ in range(count))
        collection = "ordered"
        variadic = False
        while self.toks.peek() in ("sorted", "sorted-dedup", "variadic"):
            tok = self.toks.next()
            if tok == "variadic":
                variadic = True
            else:
                collection = tok
        self.toks.expect(";")
        if name in {o.name for o in self.ops}:
            raise SigError(f"duplicate operation {name}")
        self.ops.append(OperationSpec(name, binders, collection, variadic))

    def _metadecls(self) -> list[MetaVarDecl]:
        decls = []
        while self.toks.peek() != ":":
            name = self.toks.ident()
            self.toks.expect(":")
            level = self.toks.number()
            uses: set[int] = set()
            if self.toks.peek() == "!*":
                self.toks.next()
                # the sole fresh slot must occur; multi-slot variants list none
                uses = set(range(level))
            decls.append(MetaVarDecl(name, level, frozenset(uses)))
        return decls

    def _eq(self):
        name = self.toks.ident()
        level = 0
        if self.toks.peek() == "level":
            self.toks.next()
            level = self.toks.number()
        self.toks.expect("meta")
        decls = self._metadecls()
        self.toks.expect(":")
        ctx = _MTCtx(self, decls)
        lhs = ctx.parse_metaterm("term", level, [f"*{i+1}" for i in range(level)])
        self.toks.expect("=")
        rhs = ctx.parse_metaterm("term", level, [f"*{i+1}" for i in range(level)])
        mode, hook = "rewrite-lr", None
        if self.toks.peek() in ("rewrite", "canonical"):
            tok = self.toks.next()
            if tok == "canonical":
                mode = "canonical"
                hook = self.toks.ident()
        self.toks.expect(";")
        self.equations.append(
            EquationSpec(name, tuple(decls), level, lhs, rhs, mode, hook)
        )

    def _rule(self):
        name = self.toks.ident()
        self.toks.expect("meta")
        decls = self._metadecls()
        self.toks.expect(":")
        ctx = _MTCtx(self, decls)
        self.toks.expect("{")
        hyps = []
        while self.toks.peek() != "}":
            hyps.append(self._endpoint(ctx))
            self.toks.expect(";")
        self.toks.expect("}")
        self.toks.expect("=>")
        conclusion = self._endpoint(ctx)
        self.toks.expect(";")
        self.rules.append(
            ReductionRuleSpec(name, tuple(decls), tuple(hyps), conclusion)
        )

    def _endpoint(self, ctx: "_MTCtx"):
        # the level annotation trails the endpoint, so parse tokens twice:
        # scan ahead for "@ <n>" by trial-parsing at level 0 first
        save = self.toks.i
        level = self._peek_level(save)
        env = [f"*{i+1}" for i in range(level)]
        src = ctx.parse_metaterm("state1" if self._stateful() else "term", level, env)
        self.toks.expect("~>")
        tgt = ctx.parse_metaterm("state2" if self._stateful() else "term", level, env)
        if self.toks.peek() == "@":
            self.toks.next()
            self.toks.number()
        return (level, src, tgt)

    def _peek_level(self, start: int) -> int:
        depth = 0
        i = start
        toks = self.toks.toks
        while i < len(toks):
            tok = toks[i][0]
            if tok in "([{":
                depth += 1
            elif tok in ")]}":
                if depth == 0:
                    break
                depth -= 1
            elif tok == ";" and depth == 0:
                break
            elif tok == "@" and depth == 0:
                if i + 1 < len(toks) and toks[i + 1][0].isdigit():
                    return int(toks[i + 1][0])
            i += 1
        return 0

    def _stateful(self) -> bool:
        return bool(self.functors)

    def _state(self):
        fname = self.toks.ident()
        self.toks.expect("{")
        ops: list[StateOpSpec] = []
        embeds: list[EmbedSpec] = []
        while self.toks.peek() != "}":
            head = self.toks.next()
            if head == "op":
                name = self.toks.ident()
                slots = []
                while self.toks.peek() != ";":
                    kind = self.toks.next()
                    if kind == "base":
                        slots.append(SlotSpec("base", 0))
                    elif kind in ("term", "state"):
                        self.toks.expect(":")
                        slots.append(SlotSpec(kind, self.toks.number()))
                    else:
                        raise SigError(f"bad slot kind {kind!r}", *self.toks.loc())
                self.toks.expect(";")
                ops.append(StateOpSpec(name, tuple(slots)))
            elif head == "embed":
                name = self.toks.ident()
                split_op = self.toks.ident()
                node_op = self.toks.ident()
                leaf_op = self.toks.ident()
                self.toks.expect(";")
                embeds.append(EmbedSpec(name, split_op, node_op, leaf_op))
            else:
                raise SigError(f"unknown state statement {head!r}", *self.toks.loc())
        self.toks.expect("}")
        self.functors.append(StateFunctorSpec(fname, tuple(ops), tuple(embeds)))


class _MTCtx:
    """Metaterm sub-parser: sort-directed, binder names resolve to fresh slots."""

    def __init__(self, parser: _SigParser, decls: list[MetaVarDecl]):
        self.parser = parser
        self.decls = {d.name: d for d in decls}

    @property
    def toks(self) -> _SigTokens:
        return self.parser.toks

    def _functor(self, sort: str) -> StateFunctorSpec:
        index = 0 if sort == "state1" else 1
        return self.parser.functors[index]

    def parse_metaterm(self, sort: str, level: int, env: list[str]):
        toks = self.toks
        if toks.peek() == "*":
            toks.next()
            k = toks.number()
            if k < 1:
                raise SigError("fresh slots are numbered from *1", *toks.loc())
            return Fresh(k - 1)
        name = toks.ident()
        # binder name?
        for i in range(len(env) - 1, -1, -1):
            if env[i] == name:
                return Fresh(i)
        if name in self.decls:
            return self._mvar(name, level, env)
        if sort in ("state1", "state2"):
            functor = self._functor(sort)
            if name in functor.ops_by_name:
                return self._sop(functor, name, sort, level, env)
            if name in functor.embeds_by_name:
                self.toks.expect("(")
                arg = self.parse_metaterm("term", level, env)
                self.toks.expect(")")
                return SEmbed(name, arg)
            raise SigError(f"unknown state operation or metavariable {name!r}",
                           *toks.loc())
        ops = {o.name: o for o in self.parser.ops}
        if name in ops:
            return self._mop(ops[name], level, env)
        raise SigError(f"unknown operation or metavariable {name!r}", *toks.loc())

    def _mvar(self, name: str, level: int, env: list[str]) -> MVar:
        decl = self.decls[name]
        m = decl.level
        if self.toks.peek() == "[":
            self.toks.next()
            subs = []
            for k in range(m):
                if k > 0:
                    self.toks.expect(",")
                self.toks.expect("*")
                pos = self.toks.number()
                if pos != k + 1:
                    raise SigError(
                        f"substitution slots must be listed in order (*{k + 1})",
                        *self.toks.loc(),
                    )
                self.toks.expect(":=")
                subs.append(self.parse_metaterm("term", level, env))
            self.toks.expect("]")
            return MVar(name, tuple(subs))
        if m > level:
            raise SigError(
                f"metavariable {name} of level {m} used at level {level} without "
                "an explicit substitution", *self.toks.loc()
            )
        return MVar(name, tuple(Fresh(level - m + i) for i in range(m)))

    def _mop(self, spec: OperationSpec, level: int, env: list[str]) -> MOp:
        from .terms import arg_binders

        self.toks.expect("(")
        args = []
        if self.toks.peek() == ")":
            self.toks.next()
        else:
            while True:
                k = (spec.binders[0] if spec.variadic
                     else (spec.binders[len(args)] if len(args) < len(spec.binders) else None))
                if k is None:
                    raise SigError(f"operation {spec.name} given too many arguments",
                                   *self.toks.loc())
                args.append(self._binder_arg("term", k, level, env))
                if self.toks.peek() == ",":
                    self.toks.next()
                    continue
                self.toks.expect(")")
                break
        return MOp(spec.name, tuple(args))

    def _sop(self, functor: StateFunctorSpec, name: str, sort: str,
             level: int, env: list[str]) -> SOp:
        spec = functor.op(name)
        self.toks.expect("(")
        args = []
        if self.toks.peek() == ")":
            self.toks.next()
        else:
            while True:
                if len(args) >= len(spec.slots):
                    raise SigError(f"state operation {name} given too many slots",
                                   *self.toks.loc())
                slot = spec.slots[len(args)]
                if slot.kind == "base":
                    args.append(self.parse_metaterm("term", level, env))
                elif slot.kind == "term":
                    args.append(self._binder_arg("term", slot.level, level, env))
                else:
                    args.append(self._binder_arg(sort, slot.level, level, env))
                if self.toks.peek() == ",":
                    self.toks.next()
                    continue
                self.toks.expect(")")
                break
        return SOp(name, tuple(args))

    def _binder_arg(self, sort: str, k: int, level: int, env: list[str]):
        if k == 0:
            return self.parse_metaterm(sort, level, env)
        binders = []
        for _ in range(k):
            binders.append(self.toks.ident())
        self.toks.expect(".")
        return self.parse_metaterm(sort, level + k, env + binders)


def parse_signature(text: str) -> SignatureDoc:
    """Parse the signature-file grammar; raises SigError with line/column."""
    return _SigParser(text).parse()


# ---------------------------------------------------------------------------
# Printing

def print_metaterm(mt, level: int, doc: SignatureDoc | None = None,
                   decls: dict[str, int] | None = None) -> str:
    """Render a metaterm; ambient fresh slots print as *1..*n, binders get names."""
    decls = decls or {}

    def fresh_name(i: int, env: list[str]) -> str:
        return env[i] if i < len(env) else f"*{i + 1}"

    def go(mt, level: int, env: list[str]) -> str:
        match mt:
            case Fresh(i):
                return fresh_name(i, env)
            case MVar(name, subs):
                m = len(subs)
                ident = tuple(Fresh(level - m + i) for i in range(m))
                if subs == ident:
                    return name
                inner = ", ".join(
                    f"*{k + 1}:={go(s, level, env)}" for k, s in enumerate(subs)
                )
                return f"{name}[{inner}]"
            case MOp(name, args):
                from .terms import arg_binders

                spec = doc.op(name) if doc else None
                ks = arg_binders(spec, args) if spec else [0] * len(args)
                return name + "(" + ", ".join(
                    _arg(a, k, level, env) for a, k in zip(args, ks)
                ) + ")"
            case SOp(name, args):
                functor = _functor_of(doc, name)
                spec = functor.op(name)
                parts = []
                for a, slot in zip(args, spec.slots):
                    k = 0 if slot.kind == "base" else slot.level
                    parts.append(_arg(a, k, level, env))
                return name + "(" + ", ".join(parts) + ")"
            case SEmbed(name, arg):
                return f"{name}({go(arg, level, env)})"
        raise SigError(f"not a metaterm: {mt!r}")

    def _arg(a, k: int, level: int, env: list[str]) -> str:
        if k == 0:
            return go(a, level, env)
        names = [f"b{level + j}" for j in range(k)]
        return " ".join(names) + ". " + go(a, level + k, env + names)

    return go(mt, level, [f"*{i + 1}" for i in range(level)])


def _functor_of(doc: SignatureDoc | None, opname: str) -> StateFunctorSpec:
    if doc is not None and doc.state is not None:
        for functor in doc.state:
            if opname in functor.ops_by_name:
                return functor
    raise SigError(f"unknown state operation {opname}")


def print_signature(doc: SignatureDoc) -> str:
    """Emit the document in the signature-file grammar (parses back equal)."""
    lines: list[str] = []
    for op in doc.ops:
        parts = [f"op {op.name} {len(op.binders)}"]
        parts.extend(str(b) for b in op.binders)
        if op.collection != "ordered":
            parts.append(op.collection)
        if op.variadic:
            parts.append("variadic")
        lines.append(" ".join(parts) + ";")
    for eq in doc.equations:
        head = f"eq {eq.name}"
        if eq.level:
            head += f" level {eq.level}"
        head += " meta " + " ".join(_print_decl(d) for d in eq.metavars)
        body = (
            f"{print_metaterm(eq.lhs, eq.level, doc)} = "
            f"{print_metaterm(eq.rhs, eq.level, doc)}"
        )
        mode = "rewrite" if eq.mode == "rewrite-lr" else f"canonical {eq.hook}"
        lines.append(f"{head} : {body} {mode};")
    if doc.state is not None:
        for functor in doc.state:
            lines.append(f"state {functor.name} {{")
            for sop in functor.ops:
                slot_s = " ".join(
                    s.kind if s.kind == "base" else f"{s.kind}:{s.level}"
                    for s in sop.slots
                )
                lines.append(f"  op {sop.name}{' ' + slot_s if slot_s else ''};")
            for emb in functor.embeds:
                lines.append(
                    f"  embed {emb.name} {emb.split_op} {emb.node_op} {emb.leaf_op};"
                )
            lines.append("}")
    if doc.state_canonicalizer:
        lines.append(f"canon {doc.state_canonicalizer};")
    for rule in doc.rules:
        head = f"rule {rule.name} meta " + " ".join(
            _print_decl(d) for d in rule.metavars
        )
        hyp_parts = []
        for (n, s, t) in rule.hypotheses:
            at = f" @{n}" if n else ""
            hyp_parts.append(
                f"{print_metaterm(s, n, doc)} ~> {print_metaterm(t, n, doc)}{at} ;"
            )
        hyps = ("{ " + " ".join(hyp_parts) + " }") if hyp_parts else "{ }"
        n, s, t = rule.conclusion
        at = f" @{n}" if n else ""
        lines.append(
            f"{head} : {hyps} => "
            f"{print_metaterm(s, n, doc)} ~> {print_metaterm(t, n, doc)}{at};"
        )
    return "\n".join(lines) + "\n"


def _print_decl(d: MetaVarDecl) -> str:
    mark = "!*" if d.uses_fresh else ""
    return f"{d.name}:{d.level}{mark}"


# ---------------------------------------------------------------------------
# Builtin catalog

BUILTIN_NAMES = (
    "lc", "lc_beta_eta", "lc_fix", "monoid", "lj", "ll", "lc_ex",
    "cbv_small", "cbv_big", "pi",
)


def builtin(name: str) -> SignatureDoc:
    """A catalog signature, loaded from the shipped corpus."""
    if name not in BUILTIN_NAMES:
        raise SigError(f"unknown builtin signature {name}")
    return parse_signature(builtin_text(name))


def builtin_text(name: str) -> str:
    if name not in BUILTIN_NAMES:
        raise SigError(f"unknown builtin signature {name}")
    from importlib import resources

    return resources.files("bindsem").joinpath(f"sigs/{name}.sig").read_text()
