"""Randomized invariant suites: monad laws, linearity, quotient, reductions.

Everything is seeded; a fixed seed reproduces the exact same cases and the
same counts.  The monad suite checks the engine against the independent
named-variable substitution oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

from .equation import equal_mod, normalize
from .monad import SubstMap, subst, weaken
from .oracles import oracle_subst
from .random_terms import random_subst, random_term, split
from .reduction import check, step, subst_derivation
from .signature import SignatureDoc
from .terms import Op, Var, arg_binders, make_op


@dataclass
class SuiteResult:
    suite: str
    signature: str
    cases: int
    passed: int

    @property
    def ok(self) -> bool:
        return self.cases == self.passed

    def line(self) -> str:
        status = "ok" if self.ok else "FAIL"
        return f"[{status}] {self.suite} ({self.signature}): {self.passed}/{self.cases}"


SUITES = ("monad", "module", "equation", "reduction")


def run_suite(suite: str, doc: SignatureDoc, sig_name: str, count: int,
              seed: int) -> SuiteResult:
    if suite == "monad":
        return _monad_suite(doc, sig_name, count, seed)
    if suite == "module":
        return _module_suite(doc, sig_name, count, seed)
    if suite == "equation":
        return _equation_suite(doc, sig_name, count, seed)
    if suite == "reduction":
        return _reduction_suite(doc, sig_name, count, seed)
    raise ValueError(f"unknown suite {suite}")


def _scope_floor(doc) -> int:
    # an op-less signature (identity monad) has no closed terms at all
    return 0 if doc.ops else 1


def _monad_suite(doc, sig_name, count, seed) -> SuiteResult:
    rng = split(seed, f"monad:{sig_name}")
    lo = _scope_floor(doc)
    passed = 0
    for _ in range(count):
        ok = True
        n, m, k = (rng.randint(lo, 4) for _ in range(3))
        t = random_term(rng, doc, n, rng.randint(0, 8))
        f = random_subst(rng, doc, n, m)
        g = random_subst(rng, doc, m, k)
        # right unit
        ok &= subst(t, SubstMap.identity(n), doc) == t
        # left unit
        if n:
            i = rng.randrange(n)
            ok &= subst(Var(i), f, doc) == f(i)
        # associativity
        ok &= subst(subst(t, f, doc), g, doc) == subst(t, f.then(g, doc), doc)
        # independent named-variable oracle
        ok &= subst(t, f, doc) == oracle_subst(t, list(f.images), n, m, doc)
        passed += bool(ok)
    return SuiteResult("monad", sig_name, count, passed)


def _module_suite(doc, sig_name, count, seed) -> SuiteResult:
    rng = split(seed, f"module:{sig_name}")
    lo = _scope_floor(doc)
    passed = 0
    for _ in range(count):
        ok = True
        n, m = rng.randint(lo, 3), rng.randint(lo, 3)
        t = random_term(rng, doc, n, rng.randint(1, 8))
        f = random_subst(rng, doc, n, m)
        if isinstance(t, Op):
            spec = doc.op(t.name)
            ks = arg_binders(spec, t.args)
            argwise = make_op(
                doc, t.name,
                [subst(a, f.lift(kk, doc), doc) for a, kk in zip(t.args, ks)],
            )
            ok &= subst(t, f, doc) == argwise
            ok &= argwise == oracle_subst(t, list(f.images), n, m, doc)
        k = rng.randint(1, 3)
        ok &= weaken(subst(t, f, doc), k, m, doc) == subst(
            weaken(t, k, n, doc), f.lift(k, doc), doc
        )
        passed += bool(ok)
    return SuiteResult("module", sig_name, count, passed)


def _equation_suite(doc, sig_name, count, seed) -> SuiteResult:
    rng = split(seed, f"equation:{sig_name}")
    lo = _scope_floor(doc)
    passed = 0
    for _ in range(count):
        ok = True
        n, m = rng.randint(lo, 3), rng.randint(lo, 3)
        t = random_term(rng, doc, n, rng.randint(0, 8))
        nf = normalize(t, doc, n).result
        ok &= normalize(nf, doc, n).result == nf
        f = random_subst(rng, doc, n, m)
        ok &= equal_mod(subst(t, f, doc), subst(nf, f, doc), doc, m)
        passed += bool(ok)
    return SuiteResult("equation", sig_name, count, passed)


def _reduction_suite(doc, sig_name, count, seed) -> SuiteResult:
    if doc.state is not None:
        return _het_reduction_suite(doc, sig_name, count, seed)
    rng = split(seed, f"reduction:{sig_name}")
    passed = 0
    produced = 0
    attempts = 0
    while produced < count and attempts < count * 30:
        attempts += 1
        n = rng.randint(0, 2)
        t = random_term(rng, doc, n, rng.randint(1, 6))
        ds = step(t, doc, n)
        if not ds:
            continue
        d = ds[rng.randrange(len(ds))]
        ok = check(d, doc)
        m = rng.randint(0, 2)
        f = random_subst(rng, doc, n, m)
        d2 = subst_derivation(d, f, doc)
        # in a quotiented signature the substituted endpoints are compared as
        # canonical representatives
        ok &= d2.endpoints == (
            normalize(subst(d.source, f, doc), doc, m).result,
            normalize(subst(d.target, f, doc), doc, m).result,
        )
        ok &= check(d2, doc)
        produced += 1
        passed += bool(ok)
    return SuiteResult("reduction", sig_name, produced, passed)


def _het_reduction_suite(doc, sig_name, count, seed) -> SuiteResult:
    """Heterogeneous variant: step embedded terms, substitute by values."""
    from .operational import (
        embed_term,
        het_check,
        het_step,
        het_subst_derivation,
        state_normalize,
        state_subst,
    )

    embeds = doc.state[0].embeds if doc.state else ()
    if not embeds:
        return SuiteResult("reduction", sig_name, 0, 0)
    embed_name = embeds[0].name
    rng = split(seed, f"reduction:{sig_name}")
    passed = 0
    produced = 0
    attempts = 0
    while produced < count and attempts < count * 30:
        attempts += 1
        n = rng.randint(0, 2)
        t = random_term(rng, doc, n, rng.randint(1, 6))
        s = embed_term(doc, "state1", embed_name, t)
        ds = het_step(s, doc, n)
        if not ds:
            continue
        d = ds[rng.randrange(len(ds))]
        ok = het_check(d, doc)
        m = rng.randint(0, 2)
        images = []
        for _ in range(n):
            if m > 0 and rng.random() < 0.5:
                images.append(Var(rng.randrange(m)))
            else:
                images.append(
                    make_op(doc, "abs", [random_term(rng, doc, m + 1, rng.randint(0, 3))])
                )
        f = SubstMap(n, m, tuple(images))
        d2 = het_subst_derivation(d, f, doc)
        ok &= d2.endpoints == (
            state_normalize(state_subst(d.source, f, doc, "state1"), doc, "state1", m),
            state_normalize(state_subst(d.target, f, doc, "state2"), doc, "state2", m),
        )
        ok &= het_check(d2, doc)
        produced += 1
        passed += bool(ok)
    return SuiteResult("reduction", sig_name, produced, passed)
