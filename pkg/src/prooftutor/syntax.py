"""Propositional formula syntax: language declarations, AST, parser, printer.

Concrete ASCII syntax: atoms are lowercase identifiers (p, q, r, ...),
metavariables are ``phi`` and ``psi``, connectives are ``~``, ``/\\``,
``\\/`` and ``->`` with precedence ``~ > /\\ > \\/ > ->`` and ``->``
associating to the right.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping

NEG = "neg"
AND = "and"
OR = "or"
IMP = "imp"

CONNECTIVES = (NEG, AND, OR, IMP)
BINARY_CONNECTIVES = (AND, OR, IMP)

CONNECTIVE_SYMBOLS = {NEG: "~", AND: "/\\", OR: "\\/", IMP: "->"}
SYMBOL_TO_CONNECTIVE = {sym: conn for conn, sym in CONNECTIVE_SYMBOLS.items()}

METAVAR_NAMES = ("phi", "psi")
SUBSTVAR_NAMES = ("s", "s1", "s2")
RESERVED_NAMES = METAVAR_NAMES + SUBSTVAR_NAMES + ("min", "max")


class FormulaSyntaxError(ValueError):
    """Input rejected by the grammar, with the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownConnectiveError(ValueError):
    """A connective symbol that is not part of the declared language."""

    def __init__(self, symbol: str, position: int = -1):
        super().__init__(f"connective '{symbol}' is not in the language")
        self.symbol = symbol
        self.position = position


class UnboundVariableError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"variable '{name}' is not bound")
        self.name = name


# --- AST ---------------------------------------------------------------


class Formula:
    """Base class for formula nodes; all nodes are immutable."""


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class MetaVar(Formula):
    """Schematic formula variable; only 'phi' and 'psi' are admitted."""

    name: str


@dataclass(frozen=True)
class SubstVar(Formula):
    """Substitution slot (s, s1, s2) used only in transform templates."""

    name: str


@dataclass(frozen=True)
class Neg(Formula):
    body: Formula


@dataclass(frozen=True)
class Bin(Formula):
    conn: str
    left: Formula
    right: Formula


@dataclass(frozen=True)
class TApp(Formula):
    """Application of a named formula-to-formula function, e.g. star(phi).

    Kept opaque by evaluation and unfolding until its argument exposes a
    head constructor.
    """

    fn: str
    arg: Formula


@dataclass(frozen=True)
class LanguageSpec:
    """Atoms and connectives a proof exercise ranges over.

    ``atoms`` lists representative atom names (the atom family is open:
    any lowercase identifier parses as an atom); ``connectives`` is the
    ordered set of connectives the induction covers.
    """

    atoms: tuple[str, ...]
    connectives: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValueError("language needs at least one atom")
        if len(set(self.atoms)) != len(self.atoms):
            raise ValueError("atom names must be distinct")
        for name in self.atoms:
            if name in RESERVED_NAMES or not re.fullmatch(r"[a-z][a-zA-Z0-9]*", name):
                raise ValueError(f"invalid atom name {name!r}")
        if not self.connectives:
            raise ValueError("language needs at least one connective")
        for conn in self.connectives:
            if conn not in CONNECTIVES:
                raise ValueError(f"unknown connective kind {conn!r}")
        if len(set(self.connectives)) != len(self.connectives):
            raise ValueError("duplicate connective")

    def has(self, conn: str) -> bool:
        return conn in self.connectives

    @property
    def binary_connectives(self) -> tuple[str, ...]:
        return tuple(c for c in self.connectives if c != NEG)


ALL_CONNECTIVES_LANG = None  # sentinel: parser accepts every connective


# --- Tokenizer ----------------------------------------------------------

_SYMBOLS = ("/\\", "\\/", "->", "<=", ">=", "~", "(", ")", "+", "-", "*", ",", "=", "<", ">", "^")
_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*")
_INT_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'int' | 'sym' | 'eof'
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(), i))
            i = m.end()
            continue
        m = _INT_RE.match(text, i)
        if m:
            tokens.append(Token("int", m.group(), i))
            i = m.end()
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("sym", sym, i))
                i += len(sym)
                break
        else:
            raise FormulaSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(Token("eof", "", n))
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self._tokens = tokens
        self._idx = 0

    def peek(self) -> Token:
        return self._tokens[self._idx]

    def next(self) -> Token:
        tok = self._tokens[self._idx]
        if tok.kind != "eof":
            self._idx += 1
        return tok

    def accept_sym(self, sym: str) -> bool:
        tok = self.peek()
        if tok.kind == "sym" and tok.text == sym:
            self.next()
            return True
        return False

    def expect_sym(self, sym: str) -> Token:
        tok = self.peek()
        if tok.kind != "sym" or tok.text != sym:
            raise FormulaSyntaxError(f"expected {sym!r}", tok.pos)
        return self.next()

    def expect_eof(self) -> None:
        tok = self.peek()
        if tok.kind != "eof":
            raise FormulaSyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)


# --- Parser -------------------------------------------------------------


class _FormulaParser:
    """Recursive-descent parser for the plain formula grammar."""

    def __init__(self, stream: TokenStream, lang: LanguageSpec | None, allow_substvars: bool):
        self.stream = stream
        self.lang = lang
        self.allow_substvars = allow_substvars

    def _check_conn(self, conn: str, tok: Token) -> None:
        if self.lang is not None and not self.lang.has(conn):
            raise UnknownConnectiveError(tok.text, tok.pos)

    def parse(self) -> Formula:
        return self._imp()

    def _imp(self) -> Formula:
        left = self._or()
        tok = self.stream.peek()
        if tok.kind == "sym" and tok.text == "->":
            self.stream.next()
            self._check_conn(IMP, tok)
            right = self._imp()  # right-associative
            return Bin(IMP, left, right)
        return left

    def _or(self) -> Formula:
        left = self._and()
        while True:
            tok = self.stream.peek()
            if tok.kind == "sym" and tok.text == "\\/":
                self.stream.next()
                self._check_conn(OR, tok)
                left = Bin(OR, left, self._and())
            else:
                return left

    def _and(self) -> Formula:
        left = self._neg()
        while True:
            tok = self.stream.peek()
            if tok.kind == "sym" and tok.text == "/\\":
                self.stream.next()
                self._check_conn(AND, tok)
                left = Bin(AND, left, self._neg())
            else:
                return left

    def _neg(self) -> Formula:
        tok = self.stream.peek()
        if tok.kind == "sym" and tok.text == "~":
            self.stream.next()
            self._check_conn(NEG, tok)
            return Neg(self._neg())
        if tok.kind == "sym" and tok.text == "(":
            self.stream.next()
            inner = self._imp()
            self.stream.expect_sym(")")
            return inner
        if tok.kind == "ident":
            self.stream.next()
            return self._leaf(tok)
        raise FormulaSyntaxError(f"expected a formula, found {tok.text or 'end of input'!r}", tok.pos)

    def _leaf(self, tok: Token) -> Formula:
        name = tok.text
        if name in METAVAR_NAMES:
            return MetaVar(name)
        if name in SUBSTVAR_NAMES:
            if not self.allow_substvars:
                raise FormulaSyntaxError(f"{name!r} is reserved for function templates", tok.pos)
            return SubstVar(name)
        if name in ("min", "max") or not name[0].islower():
            raise FormulaSyntaxError(f"invalid atom name {name!r}", tok.pos)
        return Atom(name)


def parse_formula(text: str, lang: LanguageSpec | None) -> Formula:
    """Parse a plain formula, rejecting connectives outside ``lang``."""
    stream = TokenStream(tokenize(text))
    parser = _FormulaParser(stream, lang, allow_substvars=False)
    formula = parser.parse()
    stream.expect_eof()
    return formula


def parse_template(text: str, lang: LanguageSpec | None = None) -> Formula:
    """Parse a transform-function template, which may use s, s1, s2."""
    stream = TokenStream(tokenize(text))
    parser = _FormulaParser(stream, lang, allow_substvars=True)
    formula = parser.parse()
    stream.expect_eof()
    return formula


# --- Printer ------------------------------------------------------------

_BIN_PREC = {IMP: 1, OR: 2, AND: 3}
_NEG_PREC = 4


def print_formula(formula: Formula) -> str:
    """Render with minimal parentheses; inverse of parse_formula."""
    return _print(formula, 0, "")


def _print(f: Formula, parent_prec: int, side: str) -> str:
    if isinstance(f, (Atom, MetaVar, SubstVar)):
        return f.name
    if isinstance(f, TApp):
        return f"{f.fn}({_print(f.arg, 0, '')})"
    if isinstance(f, Neg):
        body = _print(f.body, _NEG_PREC, "")
        if isinstance(f.body, Bin):
            body = f"({body})"
        return "~" + body
    if isinstance(f, Bin):
        prec = _BIN_PREC[f.conn]
        sym = CONNECTIVE_SYMBOLS[f.conn]
        left = _print(f.left, prec, "l")
        right = _print(f.right, prec, "r")
        text = f"{left} {sym} {right}"
        if prec < parent_prec:
            return f"({text})"
        if prec == parent_prec:
            # and/or associate left, imp associates right
            if f.conn == IMP and side == "l":
                return f"({text})"
            if f.conn != IMP and side == "r":
                return f"({text})"
        return text
    raise TypeError(f"not a formula: {f!r}")


# --- Substitution and helpers -------------------------------------------


def substitute(template: Formula, bindings: Mapping[str, Formula]) -> Formula:
    """Simultaneously replace bound MetaVar/SubstVar leaves.

    Raises UnboundVariableError when the template contains a variable
    with no binding; replacement is single-pass, so variables occurring
    in the substituted formulas are not rewritten again.
    """
    if isinstance(template, (MetaVar, SubstVar)):
        try:
            return bindings[template.name]
        except KeyError:
            raise UnboundVariableError(template.name) from None
    if isinstance(template, Atom):
        return template
    if isinstance(template, Neg):
        return Neg(substitute(template.body, bindings))
    if isinstance(template, Bin):
        return Bin(template.conn, substitute(template.left, bindings), substitute(template.right, bindings))
    if isinstance(template, TApp):
        return TApp(template.fn, substitute(template.arg, bindings))
    raise TypeError(f"not a formula: {template!r}")


def iter_subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Neg):
        yield from iter_subformulas(f.body)
    elif isinstance(f, Bin):
        yield from iter_subformulas(f.left)
        yield from iter_subformulas(f.right)
    elif isinstance(f, TApp):
        yield from iter_subformulas(f.arg)


def is_concrete(f: Formula) -> bool:
    """True when the formula contains no metavariables, slots or applications."""
    return all(not isinstance(g, (MetaVar, SubstVar, TApp)) for g in iter_subformulas(f))


def metavars_in(f: Formula) -> set[str]:
    return {g.name for g in iter_subformulas(f) if isinstance(g, MetaVar)}


def atoms_in(f: Formula) -> set[str]:
    return {g.name for g in iter_subformulas(f) if isinstance(g, Atom)}


def connectives_in(f: Formula) -> set[str]:
    found: set[str] = set()
    for g in iter_subformulas(f):
        if isinstance(g, Neg):
            found.add(NEG)
        elif isinstance(g, Bin):
            found.add(g.conn)
    return found


def formula_size(f: Formula) -> int:
    """Number of connective nodes."""
    size = 0
    for g in iter_subformulas(f):
        if isinstance(g, (Neg, Bin)):
            size += 1
    return size
