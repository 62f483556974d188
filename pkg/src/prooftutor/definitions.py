"""Inductively defined functions and their evaluation and unfolding.

Three kinds are supported: counting functions from formulas to natural
numbers whose cases are affine in the recursive calls, transform
functions from formulas to formulas whose cases substitute recursive
results into fixed templates, and valuations with classical semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

from .syntax import (
    AND,
    BINARY_CONNECTIVES,
    CONNECTIVES,
    IMP,
    NEG,
    OR,
    Atom,
    Bin,
    Formula,
    MetaVar,
    Neg,
    SubstVar,
    TApp,
    connectives_in,
    is_concrete,
    substitute,
)
from .terms import (
    FApp,
    FormulaExpr,
    MaxOf,
    MinOf,
    NumConst,
    ProofExpr,
    Scale,
    Sum,
    VApp,
    affine_expr,
    make_scale,
    make_sum,
    one_minus,
)


class MissingCaseError(ValueError):
    def __init__(self, fn: str, case: str):
        super().__init__(f"function '{fn}' has no case for {case}")
        self.fn = fn
        self.case = case


class NotConcreteError(ValueError):
    """Evaluation reached a metavariable, slot or opaque application."""


class UnassignedAtomError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"atom '{name}' has no assigned truth value")
        self.name = name


class NoRedexError(ValueError):
    """No definition can be unfolded anywhere in the expression."""


@dataclass(frozen=True)
class CountingFunctionDef:
    """f(atom) = c, f(~x) = a + b*f(x), f(x □ y) = a□ + b□*f(x) + c□*f(y)."""

    name: str
    atom_default: int
    neg_case: tuple[int, int] | None = None
    bin_cases: Mapping[str, tuple[int, int, int]] = field(default_factory=dict)
    atom_cases: Mapping[str, int] = field(default_factory=dict)

    kind = "counting"

    def atom_value(self, atom: str) -> int:
        return self.atom_cases.get(atom, self.atom_default)

    def covers(self, conn: str) -> bool:
        if conn == NEG:
            return self.neg_case is not None
        return conn in self.bin_cases

    @property
    def covered_connectives(self) -> set[str]:
        covered = set(self.bin_cases)
        if self.neg_case is not None:
            covered.add(NEG)
        return covered


@dataclass(frozen=True)
class TransformFunctionDef:
    """Formula-to-formula function in template form.

    The atom template is a formula over the slot ``s`` standing for the
    atom itself; the negation template is over ``s`` standing for the
    recursive result; binary templates are over ``s1`` and ``s2``.
    """

    name: str
    domain: tuple[str, ...]
    codomain: tuple[str, ...]
    atom_template: Formula = SubstVar("s")
    neg_template: Formula | None = None
    bin_templates: Mapping[str, Formula] = field(default_factory=dict)

    kind = "transform"

    def covers(self, conn: str) -> bool:
        if conn == NEG:
            return self.neg_template is not None
        return conn in self.bin_templates

    @property
    def covered_connectives(self) -> set[str]:
        covered = set(self.bin_templates)
        if self.neg_template is not None:
            covered.add(NEG)
        return covered


@dataclass(frozen=True)
class ValuationProperty:
    """Per-atom fact about a valuation: V(p) comp other-valuation(p) or V(p) comp 0/1."""

    left: str
    comp: str
    right: Union[str, int]


@dataclass(frozen=True)
class ValuationDef:
    name: str
    properties: tuple[ValuationProperty, ...] = ()

    kind = "valuation"


FunctionDef = Union[CountingFunctionDef, TransformFunctionDef, ValuationDef]
Registry = Mapping[str, FunctionDef]

IDENTITY_TRANSFORM = TransformFunctionDef(
    name="id",
    domain=CONNECTIVES,
    codomain=CONNECTIVES,
    atom_template=SubstVar("s"),
    neg_template=Neg(SubstVar("s")),
    bin_templates={conn: Bin(conn, SubstVar("s1"), SubstVar("s2")) for conn in BINARY_CONNECTIVES},
)


# --- Concrete evaluation ---------------------------------------------------


def eval_counting(fn: CountingFunctionDef, formula: Formula) -> int:
    if isinstance(formula, Atom):
        return fn.atom_value(formula.name)
    if isinstance(formula, Neg):
        if fn.neg_case is None:
            raise MissingCaseError(fn.name, "~")
        a, b = fn.neg_case
        return a + b * eval_counting(fn, formula.body)
    if isinstance(formula, Bin):
        case = fn.bin_cases.get(formula.conn)
        if case is None:
            raise MissingCaseError(fn.name, formula.conn)
        a, b, c = case
        return a + b * eval_counting(fn, formula.left) + c * eval_counting(fn, formula.right)
    raise NotConcreteError(f"cannot evaluate {fn.name} on a non-concrete formula")


def eval_transform(fn: TransformFunctionDef, formula: Formula) -> Formula:
    if isinstance(formula, Atom):
        return substitute(fn.atom_template, {"s": formula})
    if isinstance(formula, Neg):
        if fn.neg_template is None:
            raise MissingCaseError(fn.name, "~")
        return substitute(fn.neg_template, {"s": eval_transform(fn, formula.body)})
    if isinstance(formula, Bin):
        template = fn.bin_templates.get(formula.conn)
        if template is None:
            raise MissingCaseError(fn.name, formula.conn)
        return substitute(
            template,
            {"s1": eval_transform(fn, formula.left), "s2": eval_transform(fn, formula.right)},
        )
    raise NotConcreteError(f"cannot evaluate {fn.name} on a non-concrete formula")


def eval_valuation(assignment: Mapping[str, int], formula: Formula) -> int:
    """Classical semantics over a truth assignment for the atoms."""
    if isinstance(formula, Atom):
        try:
            return assignment[formula.name]
        except KeyError:
            raise UnassignedAtomError(formula.name) from None
    if isinstance(formula, Neg):
        return 1 - eval_valuation(assignment, formula.body)
    if isinstance(formula, Bin):
        left = eval_valuation(assignment, formula.left)
        right = eval_valuation(assignment, formula.right)
        if formula.conn == AND:
            return min(left, right)
        if formula.conn == OR:
            return max(left, right)
        if formula.conn == IMP:
            return max(1 - left, right)
        raise ValueError(f"unknown connective {formula.conn!r}")
    raise NotConcreteError("cannot evaluate a valuation on a non-concrete formula")


def concretize_formula(registry: Registry, formula: Formula, meta_env: Mapping[str, Formula]) -> Formula:
    """Instantiate metavariables and evaluate all transform applications."""
    if isinstance(formula, Atom):
        return formula
    if isinstance(formula, MetaVar):
        try:
            return meta_env[formula.name]
        except KeyError:
            raise NotConcreteError(f"metavariable {formula.name} not instantiated") from None
    if isinstance(formula, Neg):
        return Neg(concretize_formula(registry, formula.body, meta_env))
    if isinstance(formula, Bin):
        return Bin(
            formula.conn,
            concretize_formula(registry, formula.left, meta_env),
            concretize_formula(registry, formula.right, meta_env),
        )
    if isinstance(formula, TApp):
        fn = registry.get(formula.fn)
        if not isinstance(fn, TransformFunctionDef):
            raise NotConcreteError(f"'{formula.fn}' is not a transform function")
        return eval_transform(fn, concretize_formula(registry, formula.arg, meta_env))
    raise NotConcreteError(f"cannot make {formula!r} concrete")


def eval_expr(
    registry: Registry,
    expr: ProofExpr,
    meta_env: Mapping[str, Formula],
    valuations: Mapping[str, Mapping[str, int]] | None = None,
) -> int:
    """Evaluate a numeric- or truth-sort expression at a concrete instantiation."""
    if isinstance(expr, NumConst):
        return expr.value
    if isinstance(expr, Sum):
        return sum(eval_expr(registry, t, meta_env, valuations) for t in expr.terms)
    if isinstance(expr, Scale):
        return expr.coeff * eval_expr(registry, expr.arg, meta_env, valuations)
    if isinstance(expr, MinOf):
        return min(eval_expr(registry, a, meta_env, valuations) for a in expr.args)
    if isinstance(expr, MaxOf):
        return max(eval_expr(registry, a, meta_env, valuations) for a in expr.args)
    if isinstance(expr, FApp):
        fn = registry.get(expr.fn)
        if not isinstance(fn, CountingFunctionDef):
            raise NotConcreteError(f"'{expr.fn}' is not a counting function")
        return eval_counting(fn, concretize_formula(registry, expr.arg, meta_env))
    if isinstance(expr, VApp):
        if valuations is None or expr.fn not in valuations:
            raise UnassignedAtomError(expr.fn)
        return eval_valuation(valuations[expr.fn], concretize_formula(registry, expr.arg, meta_env))
    raise NotConcreteError(f"cannot evaluate {expr!r}")


def eval_formula_expr(
    registry: Registry, expr: ProofExpr, meta_env: Mapping[str, Formula]
) -> Formula:
    if not isinstance(expr, FormulaExpr):
        raise NotConcreteError("expected a formula-sort expression")
    return concretize_formula(registry, expr.formula, meta_env)


# --- One-step symbolic unfolding -------------------------------------------


def counting_case_expr(fn: CountingFunctionDef, arg: Formula) -> ProofExpr | None:
    """Unfold one application of a counting function by the head of its argument."""
    if isinstance(arg, Atom):
        return NumConst(fn.atom_value(arg.name))
    if isinstance(arg, Neg):
        if fn.neg_case is None:
            raise MissingCaseError(fn.name, "~")
        a, b = fn.neg_case
        return affine_expr(a, [(b, FApp(fn.name, arg.body))])
    if isinstance(arg, Bin):
        case = fn.bin_cases.get(arg.conn)
        if case is None:
            raise MissingCaseError(fn.name, arg.conn)
        a, b, c = case
        return affine_expr(a, [(b, FApp(fn.name, arg.left)), (c, FApp(fn.name, arg.right))])
    return None


def transform_case_formula(fn: TransformFunctionDef, arg: Formula) -> Formula | None:
    if isinstance(arg, Atom):
        return substitute(fn.atom_template, {"s": arg})
    if isinstance(arg, Neg):
        if fn.neg_template is None:
            raise MissingCaseError(fn.name, "~")
        return substitute(fn.neg_template, {"s": TApp(fn.name, arg.body)})
    if isinstance(arg, Bin):
        template = fn.bin_templates.get(arg.conn)
        if template is None:
            raise MissingCaseError(fn.name, arg.conn)
        return substitute(template, {"s1": TApp(fn.name, arg.left), "s2": TApp(fn.name, arg.right)})
    return None


def valuation_case_expr(name: str, arg: Formula) -> ProofExpr | None:
    """Unfold a valuation application by the classical clause for the head."""
    if isinstance(arg, Neg):
        return one_minus(VApp(name, arg.body))
    if isinstance(arg, Bin):
        left = VApp(name, arg.left)
        right = VApp(name, arg.right)
        if arg.conn == AND:
            return MinOf((left, right))
        if arg.conn == OR:
            return MaxOf((left, right))
        if arg.conn == IMP:
            return MaxOf((one_minus(left), right))
    return None


def _formula_unfolds(registry: Registry, formula: Formula) -> Iterator[tuple[Formula, str]]:
    """All single transform-unfold results inside a formula, outermost first."""
    if isinstance(formula, TApp):
        fn = registry.get(formula.fn)
        if isinstance(fn, TransformFunctionDef):
            result = transform_case_formula(fn, formula.arg)
            if result is not None:
                yield result, formula.fn
        for inner, name in _formula_unfolds(registry, formula.arg):
            yield TApp(formula.fn, inner), name
    elif isinstance(formula, Neg):
        for inner, name in _formula_unfolds(registry, formula.body):
            yield Neg(inner), name
    elif isinstance(formula, Bin):
        for inner, name in _formula_unfolds(registry, formula.left):
            yield Bin(formula.conn, inner, formula.right), name
        for inner, name in _formula_unfolds(registry, formula.right):
            yield Bin(formula.conn, formula.left, inner), name


def single_unfolds(registry: Registry, expr: ProofExpr) -> list[tuple[ProofExpr, str]]:
    """Every expression obtained by rewriting exactly one redex, in
    leftmost-outermost order, paired with the unfolded function name."""
    results: list[tuple[ProofExpr, str]] = []
    if isinstance(expr, FApp):
        fn = registry.get(expr.fn)
        if isinstance(fn, CountingFunctionDef):
            case = counting_case_expr(fn, expr.arg)
            if case is not None:
                results.append((case, expr.fn))
        for inner, name in _formula_unfolds(registry, expr.arg):
            results.append((FApp(expr.fn, inner), name))
    elif isinstance(expr, VApp):
        case = valuation_case_expr(expr.fn, expr.arg)
        if case is not None:
            results.append((case, expr.fn))
        for inner, name in _formula_unfolds(registry, expr.arg):
            results.append((VApp(expr.fn, inner), name))
    elif isinstance(expr, Sum):
        for i, term in enumerate(expr.terms):
            for new, name in single_unfolds(registry, term):
                items = list(expr.terms)
                items[i] = new
                results.append((make_sum(items), name))
    elif isinstance(expr, Scale):
        for new, name in single_unfolds(registry, expr.arg):
            results.append((make_scale(expr.coeff, new), name))
    elif isinstance(expr, (MinOf, MaxOf)):
        ctor = MinOf if isinstance(expr, MinOf) else MaxOf
        for i, arg in enumerate(expr.args):
            for new, name in single_unfolds(registry, arg):
                args = list(expr.args)
                args[i] = new
                results.append((ctor(tuple(args)), name))
    elif isinstance(expr, FormulaExpr):
        for inner, name in _formula_unfolds(registry, expr.formula):
            results.append((FormulaExpr(inner), name))
    return results


def unfold_step(registry: Registry, expr: ProofExpr) -> tuple[ProofExpr, str]:
    """Rewrite the leftmost-outermost redex; raises NoRedexError if none."""
    for result in single_unfolds(registry, expr):
        return result
    raise NoRedexError(f"no definition applies inside {expr!r}")


def fully_unfold(registry: Registry, expr: ProofExpr, limit: int = 200) -> ProofExpr:
    """Repeatedly unfold until no redex remains."""
    current = expr
    for _ in range(limit):
        unfolds = single_unfolds(registry, current)
        if not unfolds:
            return current
        current = unfolds[0][0]
    raise NoRedexError("unfolding did not terminate within the step limit")
