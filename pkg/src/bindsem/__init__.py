"""bindsem: a signature-driven engine for syntax with binding and its semantics.

From a declarative signature (operations with binding arities, equations,
reduction rules, optional state functors) the engine builds well-scoped terms
with capture-avoiding substitution, normalizes modulo the equations, derives
reductions, and folds or translates terms and derivations.
"""

from .signature import (
    EquationSpec,
    MetaVarDecl,
    OperationSpec,
    ReductionRuleSpec,
    SignatureDoc,
    SlotSpec,
    StateFunctorSpec,
    StateOpSpec,
    builtin,
    closure_pack,
    congruence_pack,
    coproduct,
    normalize_rule,
    parse_signature,
    print_signature,
    validate,
)
from .terms import Op, Term, Var, parse_term, print_term, term_compare, well_scoped
from .monad import SubstMap, rename, subst, swap, unary_subst, weaken
from .metaterm import (
    Assignment,
    Fresh,
    MOp,
    MVar,
    eval_metaterm,
    is_pattern,
    match_pattern,
)
from .equation import BudgetError, check_equation, equal_mod, normalize
from .reduction import (
    Derivation,
    check,
    derive,
    endpoints,
    reduction_graph,
    step,
    subst_derivation,
    trace,
)

__all__ = [name for name in dir() if not name.startswith("_")]
