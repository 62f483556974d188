"""Proof-expression algebra: symbolic numeric/truth/formula expressions,
canonical linear normal forms, and comparator composition.

Truth values are embedded as the integers 0/1 so the linear machinery is
shared; min/max stay symbolic until their arguments fold to constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .syntax import (
    AND,
    IMP,
    NEG,
    OR,
    Atom,
    Bin,
    Formula,
    FormulaSyntaxError,
    MetaVar,
    Neg,
    SubstVar,
    TApp,
    Token,
    TokenStream,
    METAVAR_NAMES,
    SUBSTVAR_NAMES,
    connectives_in,
    print_formula,
    substitute,
    tokenize,
)

COMPARATORS = ("=", "<", "<=", ">", ">=")


class IncomparableDirectionsError(ValueError):
    """Comparator chain mixes <-like and >-like directions."""


class NotLinearError(ValueError):
    """Expression has no linear normal form."""


class NotGroundError(ValueError):
    """Operation requires forms without symbolic terms."""


class ExprSortError(ValueError):
    """Expression mixes formula-sort and numeric-sort constructions."""


class UnknownFunctionError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"unknown function '{name}'")
        self.name = name


# --- Expression AST -----------------------------------------------------


class ProofExpr:
    """Base class for proof-expression nodes; all nodes are immutable."""


@dataclass(frozen=True)
class NumConst(ProofExpr):
    value: int


@dataclass(frozen=True)
class FApp(ProofExpr):
    """Application of a counting function to a formula argument."""

    fn: str
    arg: Formula


@dataclass(frozen=True)
class VApp(ProofExpr):
    """Application of a valuation to a formula argument."""

    fn: str
    arg: Formula


@dataclass(frozen=True)
class Sum(ProofExpr):
    terms: tuple[ProofExpr, ...]


@dataclass(frozen=True)
class Scale(ProofExpr):
    coeff: int
    arg: ProofExpr


@dataclass(frozen=True)
class MinOf(ProofExpr):
    args: tuple[ProofExpr, ...]


@dataclass(frozen=True)
class MaxOf(ProofExpr):
    args: tuple[ProofExpr, ...]


@dataclass(frozen=True)
class FormulaExpr(ProofExpr):
    """A formula-sort expression, e.g. the side of a syntactic-equality theorem."""

    formula: Formula


def make_sum(items: Iterable[ProofExpr]) -> ProofExpr:
    """Flatten nested sums; a singleton collapses to its item, empty to 0."""
    flat: list[ProofExpr] = []
    for item in items:
        if isinstance(item, Sum):
            flat.extend(item.terms)
        else:
            flat.append(item)
    if not flat:
        return NumConst(0)
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def make_scale(coeff: int, arg: ProofExpr) -> ProofExpr:
    if coeff == 0:
        return NumConst(0)
    if isinstance(arg, NumConst):
        return NumConst(coeff * arg.value)
    if isinstance(arg, Scale):
        return make_scale(coeff * arg.coeff, arg.arg)
    if coeff == 1:
        return arg
    return Scale(coeff, arg)


def one_minus(arg: ProofExpr) -> ProofExpr:
    return make_sum([NumConst(1), make_scale(-1, arg)])


def affine_expr(constant: int, terms: Iterable[tuple[int, ProofExpr]]) -> ProofExpr:
    """Build ``c1*e1 + ... + ck*ek + constant`` with the constant last."""
    items = [make_scale(c, e) for c, e in terms if c != 0]
    if constant != 0 or not items:
        items.append(NumConst(constant))
    return make_sum(items)


@dataclass(frozen=True)
class Statement:
    """A related pair of expressions: theorem, goal or hypothesis."""

    lhs: ProofExpr
    comp: str
    rhs: ProofExpr

    def render(self) -> str:
        return f"{print_expr(self.lhs)} {self.comp} {print_expr(self.rhs)}"


# --- Comparators ---------------------------------------------------------

_LESS_LIKE = ("<", "<=")
_GREATER_LIKE = (">", ">=")


def compose_comparators(first: str, second: str) -> str:
    """Transitive composition: x first y and y second z gives x ? z."""
    if first == "=":
        return second
    if second == "=":
        return first
    if first in _LESS_LIKE and second in _LESS_LIKE:
        return "<" if "<" in (first, second) else "<="
    if first in _GREATER_LIKE and second in _GREATER_LIKE:
        return ">" if ">" in (first, second) else ">="
    raise IncomparableDirectionsError(f"cannot compose {first!r} with {second!r}")


def fold_comparators(comps: Iterable[str]) -> str:
    result = "="
    for comp in comps:
        result = compose_comparators(result, comp)
    return result


_IMPLIES = {
    "=": {"=", "<=", ">="},
    "<": {"<", "<="},
    "<=": {"<="},
    ">": {">", ">="},
    ">=": {">="},
}


def comparator_implies(proved: str, goal: str) -> bool:
    """Whether ``x proved y`` entails ``x goal y`` for all numbers."""
    return goal in _IMPLIES[proved]


def comparator_holds(comp: str, left: int, right: int) -> bool:
    if comp == "=":
        return left == right
    if comp == "<":
        return left < right
    if comp == "<=":
        return left <= right
    if comp == ">":
        return left > right
    if comp == ">=":
        return left >= right
    raise ValueError(f"unknown comparator {comp!r}")


# --- Linear normal form ---------------------------------------------------


@dataclass(frozen=True)
class LinearForm:
    """Canonical affine combination of atomic symbolic terms.

    Terms are keyed by the atomic expression node itself and kept sorted
    by its printed rendering; zero coefficients are never stored.
    """

    constant: int
    terms: tuple[tuple[ProofExpr, int], ...]

    @staticmethod
    def from_parts(constant: int, coeffs: Mapping[ProofExpr, int]) -> "LinearForm":
        items = [(k, c) for k, c in coeffs.items() if c != 0]
        items.sort(key=lambda kv: print_expr(kv[0]))
        return LinearForm(constant, tuple(items))

    @staticmethod
    def const(value: int) -> "LinearForm":
        return LinearForm(value, ())

    @staticmethod
    def term(key: ProofExpr) -> "LinearForm":
        return LinearForm(0, ((key, 1),))

    def coeffs(self) -> dict[ProofExpr, int]:
        return dict(self.terms)

    @property
    def is_ground(self) -> bool:
        return not self.terms

    @property
    def is_zero(self) -> bool:
        return self.constant == 0 and not self.terms

    def add(self, other: "LinearForm") -> "LinearForm":
        coeffs = self.coeffs()
        for key, c in other.terms:
            coeffs[key] = coeffs.get(key, 0) + c
        return LinearForm.from_parts(self.constant + other.constant, coeffs)

    def sub(self, other: "LinearForm") -> "LinearForm":
        return self.add(other.scale(-1))

    def scale(self, factor: int) -> "LinearForm":
        return LinearForm.from_parts(self.constant * factor, {k: c * factor for k, c in self.terms})

    def render(self) -> str:
        return print_expr(linear_to_expr(self))


def normalize(expr: ProofExpr) -> LinearForm:
    """Flatten sums and scalings, fold constants, collect terms.

    Two numeric expressions are calculation-equal exactly when their
    normal forms coincide.
    """
    if isinstance(expr, NumConst):
        return LinearForm.const(expr.value)
    if isinstance(expr, (FApp, VApp)):
        return LinearForm.term(expr)
    if isinstance(expr, Sum):
        result = LinearForm.const(0)
        for item in expr.terms:
            result = result.add(normalize(item))
        return result
    if isinstance(expr, Scale):
        return normalize(expr.arg).scale(expr.coeff)
    if isinstance(expr, (MinOf, MaxOf)):
        return _normalize_lattice(expr)
    if isinstance(expr, FormulaExpr):
        raise NotLinearError("formula-sort expression has no linear form")
    raise TypeError(f"not a proof expression: {expr!r}")


def _normalize_lattice(expr: MinOf | MaxOf) -> LinearForm:
    is_min = isinstance(expr, MinOf)
    # structural flattening of same-kind nesting
    flat: list[ProofExpr] = []
    stack = list(expr.args)
    while stack:
        arg = stack.pop(0)
        if isinstance(arg, type(expr)):
            stack = list(arg.args) + stack
        else:
            flat.append(arg)
    norms = [normalize(a) for a in flat]
    grounds = [n.constant for n in norms if n.is_ground]
    symbolic: list[LinearForm] = []
    seen: set[LinearForm] = set()
    for n in norms:
        if n.is_ground or n in seen:
            continue
        seen.add(n)
        symbolic.append(n)
    bound = None
    if grounds:
        bound = min(grounds) if is_min else max(grounds)
        # truth values live in {0, 1}: 0 absorbs min, 1 absorbs max
        if is_min and bound == 0:
            return LinearForm.const(0)
        if not is_min and bound == 1:
            return LinearForm.const(1)
        if (is_min and bound == 1) or (not is_min and bound == 0):
            bound = None  # neutral element, drop
    if not symbolic:
        if bound is None:
            return LinearForm.const(1 if is_min else 0)
        return LinearForm.const(bound)
    if bound is None and len(symbolic) == 1:
        return symbolic[0]
    args = [linear_to_expr(n) for n in symbolic]
    if bound is not None:
        args.append(NumConst(bound))
    args.sort(key=print_expr)
    key: ProofExpr = MinOf(tuple(args)) if is_min else MaxOf(tuple(args))
    return LinearForm.term(key)


def linear_to_expr(form: LinearForm) -> ProofExpr:
    """Canonical expression of a linear form: terms in key order, constant last."""
    items: list[ProofExpr] = [make_scale(c, key) for key, c in form.terms]
    if form.constant != 0 or not items:
        items.append(NumConst(form.constant))
    return make_sum(items)


def canonical_expr(expr: ProofExpr) -> ProofExpr:
    return linear_to_expr(normalize(expr))


def calc_equal(a: ProofExpr, b: ProofExpr) -> bool:
    """Calculation-equality: normal-form identity (structural for formulas)."""
    if isinstance(a, FormulaExpr) or isinstance(b, FormulaExpr):
        return a == b
    return normalize(a) == normalize(b)


def decide_ground_comparison(lhs: LinearForm, rhs: LinearForm, comp: str) -> bool:
    if not lhs.is_ground or not rhs.is_ground:
        raise NotGroundError("comparison requires ground forms")
    return comparator_holds(comp, lhs.constant, rhs.constant)


def comparison_always_holds(lhs: LinearForm, comp: str, rhs: LinearForm) -> bool:
    """Sound check of ``lhs comp rhs`` for every assignment of the symbolic
    terms to natural numbers (term values are counts or truth values)."""
    diff = rhs.sub(lhs)
    if comp == "=":
        return diff.is_zero
    if comp in ("<=", "<"):
        if any(c < 0 for _, c in diff.terms):
            return False
        return diff.constant > 0 if comp == "<" else diff.constant >= 0
    if comp in (">=", ">"):
        if any(c > 0 for _, c in diff.terms):
            return False
        return diff.constant < 0 if comp == ">" else diff.constant <= 0
    raise ValueError(f"unknown comparator {comp!r}")


# --- Expression traversal -------------------------------------------------


def iter_subexprs(expr: ProofExpr) -> Iterator[ProofExpr]:
    yield expr
    if isinstance(expr, Sum):
        for t in expr.terms:
            yield from iter_subexprs(t)
    elif isinstance(expr, Scale):
        yield from iter_subexprs(expr.arg)
    elif isinstance(expr, (MinOf, MaxOf)):
        for a in expr.args:
            yield from iter_subexprs(a)


def subst_metas_expr(expr: ProofExpr, bindings: Mapping[str, Formula]) -> ProofExpr:
    """Instantiate metavariables in every formula position of the expression."""
    if isinstance(expr, NumConst):
        return expr
    if isinstance(expr, FApp):
        return FApp(expr.fn, substitute(expr.arg, bindings))
    if isinstance(expr, VApp):
        return VApp(expr.fn, substitute(expr.arg, bindings))
    if isinstance(expr, Sum):
        return Sum(tuple(subst_metas_expr(t, bindings) for t in expr.terms))
    if isinstance(expr, Scale):
        return Scale(expr.coeff, subst_metas_expr(expr.arg, bindings))
    if isinstance(expr, MinOf):
        return MinOf(tuple(subst_metas_expr(a, bindings) for a in expr.args))
    if isinstance(expr, MaxOf):
        return MaxOf(tuple(subst_metas_expr(a, bindings) for a in expr.args))
    if isinstance(expr, FormulaExpr):
        return FormulaExpr(substitute(expr.formula, bindings))
    raise TypeError(f"not a proof expression: {expr!r}")


def expr_metavars(expr: ProofExpr) -> set[str]:
    names: set[str] = set()
    for node in iter_subexprs(expr):
        if isinstance(node, (FApp, VApp)):
            names |= {v.name for v in _iter_formula_leaves(node.arg) if isinstance(v, MetaVar)}
        elif isinstance(node, FormulaExpr):
            names |= {v.name for v in _iter_formula_leaves(node.formula) if isinstance(v, MetaVar)}
    return names


def _iter_formula_leaves(f: Formula) -> Iterator[Formula]:
    from .syntax import iter_subformulas

    yield from iter_subformulas(f)


def replace_subexpr(
    expr: ProofExpr,
    target: ProofExpr,
    replacement: ProofExpr,
    *,
    positive_only: bool = False,
) -> tuple[ProofExpr, int]:
    """Replace every occurrence of ``target``; returns (result, count).

    With ``positive_only`` the replacement happens only in contexts that
    are monotone in the subterm: positive scalar coefficients, sums, and
    min/max arguments.
    """

    def walk(e: ProofExpr, positive: bool) -> tuple[ProofExpr, int]:
        if e == target:
            if positive or not positive_only:
                return replacement, 1
            return e, 0
        if isinstance(e, Sum):
            total = 0
            items = []
            for t in e.terms:
                new, n = walk(t, positive)
                items.append(new)
                total += n
            return make_sum(items), total
        if isinstance(e, Scale):
            new, n = walk(e.arg, positive if e.coeff > 0 else not positive)
            return make_scale(e.coeff, new), n
        if isinstance(e, MinOf):
            total = 0
            args = []
            for a in e.args:
                new, n = walk(a, positive)
                args.append(new)
                total += n
            return MinOf(tuple(args)), total
        if isinstance(e, MaxOf):
            total = 0
            args = []
            for a in e.args:
                new, n = walk(a, positive)
                args.append(new)
                total += n
            return MaxOf(tuple(args)), total
        return e, 0

    return walk(expr, True)


def replace_subformula(expr: ProofExpr, target: Formula, replacement: Formula) -> tuple[ProofExpr, int]:
    """Replace a formula subterm everywhere inside formula positions."""

    def walk_formula(f: Formula) -> tuple[Formula, int]:
        if f == target:
            return replacement, 1
        if isinstance(f, Neg):
            new, n = walk_formula(f.body)
            return Neg(new), n
        if isinstance(f, Bin):
            nl, a = walk_formula(f.left)
            nr, b = walk_formula(f.right)
            return Bin(f.conn, nl, nr), a + b
        if isinstance(f, TApp):
            new, n = walk_formula(f.arg)
            return TApp(f.fn, new), n
        return f, 0

    if isinstance(expr, FormulaExpr):
        new, n = walk_formula(expr.formula)
        return FormulaExpr(new), n
    return expr, 0


# --- Printer --------------------------------------------------------------

_PREC_ADD = 4
_PREC_MUL = 5


def print_expr(expr: ProofExpr) -> str:
    return _print_expr(expr, 0)


def _print_expr(expr: ProofExpr, parent_prec: int) -> str:
    if isinstance(expr, NumConst):
        return str(expr.value)
    if isinstance(expr, (FApp, VApp)):
        return f"{expr.fn}({print_formula(expr.arg)})"
    if isinstance(expr, MinOf):
        inner = ", ".join(_print_expr(a, 0) for a in expr.args)
        return f"min({inner})"
    if isinstance(expr, MaxOf):
        inner = ", ".join(_print_expr(a, 0) for a in expr.args)
        return f"max({inner})"
    if isinstance(expr, FormulaExpr):
        return print_formula(expr.formula)
    if isinstance(expr, Scale):
        text = f"{expr.coeff} * {_print_expr(expr.arg, _PREC_MUL)}"
        return f"({text})" if parent_prec > _PREC_MUL else text
    if isinstance(expr, Sum):
        parts: list[str] = []
        for i, item in enumerate(expr.terms):
            sign = "+"
            body = item
            if isinstance(item, NumConst) and item.value < 0:
                sign = "-"
                body = NumConst(-item.value)
            elif isinstance(item, Scale) and item.coeff < 0:
                sign = "-"
                body = make_scale(-item.coeff, item.arg)
            rendered = _print_expr(body, _PREC_ADD)
            if i == 0:
                parts.append(rendered if sign == "+" else f"-{rendered}")
            else:
                parts.append(f" {sign} {rendered}")
        text = "".join(parts)
        return f"({text})" if parent_prec > _PREC_ADD else text
    raise TypeError(f"not a proof expression: {expr!r}")


# --- Expression and statement parser ---------------------------------------

FunctionKinds = Mapping[str, str]  # name -> 'counting' | 'transform' | 'valuation'


class _ExprParser:
    """Parser for the expression syntax layered over the formula grammar.

    Precedence, loosest first: -> , \\/, /\\, + -, *, ~, units.  The
    connective levels build formula-sort values; mixing sorts raises
    ExprSortError.  Language membership of connectives is not enforced
    here: off-language connectives must surface as diagnosis messages,
    not parse failures.
    """

    def __init__(self, stream: TokenStream, kinds: FunctionKinds, allow_substvars: bool = False):
        self.stream = stream
        self.kinds = kinds
        self.allow_substvars = allow_substvars

    def parse_expr(self) -> ProofExpr:
        return self._imp()

    # formula-sort helpers

    def _as_formula(self, expr: ProofExpr, tok: Token) -> Formula:
        if isinstance(expr, FormulaExpr):
            return expr.formula
        raise ExprSortError(f"expected a formula near position {tok.pos}")

    def _imp(self) -> ProofExpr:
        left = self._or()
        tok = self.stream.peek()
        if tok.kind == "sym" and tok.text == "->":
            self.stream.next()
            right = self._imp()
            return FormulaExpr(Bin(IMP, self._as_formula(left, tok), self._as_formula(right, tok)))
        return left

    def _or(self) -> ProofExpr:
        left = self._and()
        while True:
            tok = self.stream.peek()
            if tok.kind == "sym" and tok.text == "\\/":
                self.stream.next()
                right = self._and()
                left = FormulaExpr(Bin(OR, self._as_formula(left, tok), self._as_formula(right, tok)))
            else:
                return left

    def _and(self) -> ProofExpr:
        left = self._additive()
        while True:
            tok = self.stream.peek()
            if tok.kind == "sym" and tok.text == "/\\":
                self.stream.next()
                right = self._additive()
                left = FormulaExpr(Bin(AND, self._as_formula(left, tok), self._as_formula(right, tok)))
            else:
                return left

    def _additive(self) -> ProofExpr:
        tok = self.stream.peek()
        items: list[ProofExpr] = []
        first = self._multiplicative()
        items.append(first)
        saw_op = False
        while True:
            nxt = self.stream.peek()
            if nxt.kind == "sym" and nxt.text in ("+", "-"):
                self.stream.next()
                term = self._multiplicative()
                if isinstance(term, FormulaExpr) or isinstance(items[0], FormulaExpr):
                    raise ExprSortError(f"arithmetic over formulas near position {nxt.pos}")
                items.append(term if nxt.text == "+" else make_scale(-1, term))
                saw_op = True
            else:
                break
        if not saw_op:
            return first
        return make_sum(items)

    def _multiplicative(self) -> ProofExpr:
        left = self._unary()
        while True:
            tok = self.stream.peek()
            if tok.kind == "sym" and tok.text == "*":
                self.stream.next()
                right = self._unary()
                if isinstance(left, NumConst):
                    left = make_scale(left.value, right)
                elif isinstance(right, NumConst):
                    left = make_scale(right.value, left)
                else:
                    raise NotLinearError(f"non-scalar multiplication near position {tok.pos}")
            else:
                return left

    def _unary(self) -> ProofExpr:
        tok = self.stream.peek()
        if tok.kind == "sym" and tok.text == "~":
            self.stream.next()
            body = self._unary()
            return FormulaExpr(Neg(self._as_formula(body, tok)))
        if tok.kind == "sym" and tok.text == "-":
            self.stream.next()
            body = self._unary()
            if isinstance(body, FormulaExpr):
                raise ExprSortError(f"negated formula-sort expression at position {tok.pos}")
            return make_scale(-1, body)
        return self._unit()

    def _unit(self) -> ProofExpr:
        tok = self.stream.next()
        if tok.kind == "int":
            return NumConst(int(tok.text))
        if tok.kind == "sym" and tok.text == "(":
            inner = self._imp()
            self.stream.expect_sym(")")
            return inner
        if tok.kind == "ident":
            name = tok.text
            if name in ("min", "max"):
                return self._lattice(name)
            nxt = self.stream.peek()
            if nxt.kind == "sym" and nxt.text == "(":
                return self._application(name, tok)
            return FormulaExpr(self._leaf_formula(name, tok))
        raise FormulaSyntaxError(f"expected an expression, found {tok.text or 'end of input'!r}", tok.pos)

    def _lattice(self, name: str) -> ProofExpr:
        self.stream.expect_sym("(")
        args = [self.parse_expr()]
        while self.stream.accept_sym(","):
            args.append(self.parse_expr())
        self.stream.expect_sym(")")
        for a in args:
            if isinstance(a, FormulaExpr):
                raise ExprSortError(f"{name} over formula-sort arguments")
        if len(args) < 2:
            raise FormulaSyntaxError(f"{name} needs at least two arguments", self.stream.peek().pos)
        return MinOf(tuple(args)) if name == "min" else MaxOf(tuple(args))

    def _application(self, name: str, tok: Token) -> ProofExpr:
        kind = self.kinds.get(name)
        if kind is None:
            raise UnknownFunctionError(name)
        self.stream.expect_sym("(")
        arg_expr = self.parse_expr()
        self.stream.expect_sym(")")
        arg = self._as_formula(arg_expr, tok)
        if kind == "counting":
            return FApp(name, arg)
        if kind == "valuation":
            return VApp(name, arg)
        if kind == "transform":
            return FormulaExpr(TApp(name, arg))
        raise ValueError(f"unknown function kind {kind!r} for {name!r}")

    def _leaf_formula(self, name: str, tok: Token) -> Formula:
        if name in METAVAR_NAMES:
            return MetaVar(name)
        if name in SUBSTVAR_NAMES:
            if not self.allow_substvars:
                raise FormulaSyntaxError(f"{name!r} is reserved for function templates", tok.pos)
            return SubstVar(name)
        if not name[0].islower():
            raise FormulaSyntaxError(f"invalid atom name {name!r}", tok.pos)
        return Atom(name)


def parse_expr(text: str, kinds: FunctionKinds) -> ProofExpr:
    stream = TokenStream(tokenize(text))
    parser = _ExprParser(stream, kinds)
    expr = parser.parse_expr()
    stream.expect_eof()
    return expr


def parse_statement(text: str, kinds: FunctionKinds) -> Statement:
    stream = TokenStream(tokenize(text))
    parser = _ExprParser(stream, kinds)
    lhs = parser.parse_expr()
    tok = stream.next()
    if tok.kind != "sym" or tok.text not in COMPARATORS:
        raise FormulaSyntaxError("expected a comparator", tok.pos)
    rhs = parser.parse_expr()
    stream.expect_eof()
    return Statement(lhs, tok.text, rhs)


def statement_metavars(stmt: Statement) -> set[str]:
    return expr_metavars(stmt.lhs) | expr_metavars(stmt.rhs)


def instantiate_statement(stmt: Statement, bindings: Mapping[str, Formula]) -> Statement:
    return Statement(
        subst_metas_expr(stmt.lhs, bindings),
        stmt.comp,
        subst_metas_expr(stmt.rhs, bindings),
    )
