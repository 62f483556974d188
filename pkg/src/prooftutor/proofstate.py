"""The structured proof document a student builds.

A proof has base-case subproofs, a block of induction hypotheses, and one
inductive subproof per connective.  Each subproof is a pair of chains: the
top chain grows downward from the instantiated left-hand side, the bottom
chain grows upward from the instantiated right-hand side, and the subproof
closes when the chain ends become calculation-equal with a comparator fold
that establishes the theorem's comparator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Mapping

from .exercises import (
    ExerciseSpec,
    case_formula,
    mandated_base_patterns,
    required_ih_metavars,
)
from .syntax import (
    CONNECTIVE_SYMBOLS,
    CONNECTIVES,
    NEG,
    SYMBOL_TO_CONNECTIVE,
    Atom,
    Bin,
    Formula,
    MetaVar,
    Neg,
)
from .terms import (
    FormulaExpr,
    ProofExpr,
    Statement,
    calc_equal,
    comparator_implies,
    fold_comparators,
    instantiate_statement,
    parse_expr,
    parse_statement,
    print_expr,
    subst_metas_expr,
    IncomparableDirectionsError,
)

TOP = "top"
BOTTOM = "bottom"


class UnknownSubproofError(ValueError):
    def __init__(self, key: "SubproofKey"):
        super().__init__(f"no subproof {key.render()!r} in this proof")
        self.key = key


class SubproofClosedError(ValueError):
    def __init__(self, key: "SubproofKey"):
        super().__init__(f"subproof {key.render()!r} is already closed")
        self.key = key


class ProofParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass(frozen=True)
class SubproofKey:
    kind: str  # 'base' | 'case'
    label: str  # atom name, or connective kind

    def render(self) -> str:
        if self.kind == "base":
            return f"base {self.label}"
        return f"case {CONNECTIVE_SYMBOLS[self.label]}"

    @staticmethod
    def base(atom: str) -> "SubproofKey":
        return SubproofKey("base", atom)

    @staticmethod
    def case(conn: str) -> "SubproofKey":
        return SubproofKey("case", conn)


@dataclass(frozen=True)
class Motivation:
    kind: str  # 'definition' | 'ih' | 'given' | 'calculation' | 'distribution' | 'unjustified'
    detail: str | None = None

    def render(self) -> str | None:
        if self.kind == "definition":
            return f"definition {self.detail}"
        if self.kind == "ih":
            return "IH"
        if self.kind == "given":
            return f"given {self.detail}"
        if self.kind in ("calculation", "distribution"):
            return self.kind
        return None


UNJUSTIFIED = Motivation("unjustified")


def parse_motivation(text: str) -> Motivation:
    text = text.strip()
    if text == "IH":
        return Motivation("ih")
    if text in ("calculation", "distribution"):
        return Motivation(text)
    for prefix in ("definition", "given"):
        if text.startswith(prefix + " "):
            return Motivation(prefix, text[len(prefix) + 1 :].strip())
    raise ValueError(f"unknown justification {text!r}")


@dataclass(frozen=True)
class ProofLine:
    expr: ProofExpr
    comparator: str | None = None
    motivation: Motivation = UNJUSTIFIED


@dataclass(frozen=True)
class Subproof:
    key: SubproofKey
    top: tuple[ProofLine, ...] = ()
    bottom: tuple[ProofLine, ...] = ()  # stored top-down; last entry is the rhs instance
    closed: bool = False

    @property
    def is_empty(self) -> bool:
        return not self.top and not self.bottom

    def display_lines(self) -> tuple[ProofLine, ...]:
        return self.top + self.bottom


@dataclass(frozen=True)
class ProofState:
    exercise_id: str
    subproofs: tuple[Subproof, ...]
    ih_block: tuple[Statement, ...] = ()
    focus: SubproofKey | None = None

    def subproof(self, key: SubproofKey) -> Subproof | None:
        for sub in self.subproofs:
            if sub.key == key:
                return sub
        return None

    def base_subproofs(self) -> tuple[Subproof, ...]:
        return tuple(s for s in self.subproofs if s.key.kind == "base")

    def case_subproofs(self) -> tuple[Subproof, ...]:
        return tuple(s for s in self.subproofs if s.key.kind == "case")

    @property
    def line_count(self) -> int:
        return sum(len(s.top) + len(s.bottom) for s in self.subproofs)


# --- Construction -----------------------------------------------------------


def mandated_keys(spec: ExerciseSpec) -> tuple[SubproofKey, ...]:
    keys = [SubproofKey.base(a) for a in mandated_base_patterns(spec)]
    keys.extend(SubproofKey.case(c) for c in spec.lang.connectives)
    return tuple(keys)


def new_proof(spec: ExerciseSpec) -> ProofState:
    """Empty proof with a pending shell for every mandated subproof."""
    return ProofState(
        exercise_id=spec.id,
        subproofs=tuple(Subproof(key) for key in mandated_keys(spec)),
    )


def _valid_new_key(spec: ExerciseSpec, key: SubproofKey) -> bool:
    if key.kind == "case":
        return key.label in CONNECTIVES
    if key.kind == "base":
        return key.label.isidentifier()
    return False


def add_line(
    spec: ExerciseSpec,
    state: ProofState,
    key: SubproofKey,
    end: str,
    line: ProofLine,
) -> ProofState:
    """Append a line to the chosen chain and re-evaluate closure.

    Top-chain lines append below the current top end; bottom-chain lines
    are inserted above the current bottom chain (working upward from the
    right-hand side).  The first line of a chain carries no comparator,
    every later line must carry one.
    """
    sub = state.subproof(key)
    subproofs = list(state.subproofs)
    if sub is None:
        if not _valid_new_key(spec, key):
            raise UnknownSubproofError(key)
        sub = Subproof(key)
        subproofs.append(sub)
    if sub.closed:
        raise SubproofClosedError(key)
    chain = sub.top if end == TOP else sub.bottom
    if not chain and line.comparator is not None:
        raise ValueError("the first line of a chain carries no comparator")
    if chain and line.comparator is None:
        raise ValueError("a continuation line must carry a comparator")
    if end == TOP:
        sub = replace(sub, top=sub.top + (line,))
    elif end == BOTTOM:
        sub = replace(sub, bottom=(line,) + sub.bottom)
    else:
        raise ValueError(f"unknown chain end {end!r}")
    sub = replace(sub, closed=_compute_closed(spec, sub))
    subproofs[[s.key for s in subproofs].index(key)] = sub
    return replace(state, subproofs=tuple(subproofs), focus=key)


def state_ih(state: ProofState, statement: Statement) -> ProofState:
    """Record an induction-hypothesis statement; idempotent."""
    if statement in state.ih_block:
        return state
    return replace(state, ih_block=state.ih_block + (statement,))


# --- Instances and closure ----------------------------------------------------


def instantiation_candidates(spec: ExerciseSpec, key: SubproofKey) -> tuple[Formula, ...]:
    """Formulas a subproof may legitimately instantiate the theorem with."""
    if key.kind == "base":
        return (Atom(key.label),)
    if key.label == NEG:
        return (Neg(MetaVar("phi")), Neg(MetaVar("psi")))
    conn = key.label
    return (
        Bin(conn, MetaVar("phi"), MetaVar("psi")),
        Bin(conn, MetaVar("psi"), MetaVar("phi")),
    )


def instance_binding(spec: ExerciseSpec, key: SubproofKey, side: str, expr: ProofExpr) -> Formula | None:
    """The case formula the endpoint instantiates the theorem side with, if any."""
    template = spec.theorem.lhs if side == "lhs" else spec.theorem.rhs
    for candidate in instantiation_candidates(spec, key):
        expected = subst_metas_expr(template, {"phi": candidate})
        if calc_equal(expected, expr):
            return candidate
    return None


def subproof_fold(sub: Subproof) -> str | None:
    """Fold of all step comparators in display order, None when mixed."""
    comps = [line.comparator for line in sub.top[1:]]
    comps.extend(line.comparator for line in sub.bottom[:-1])
    try:
        return fold_comparators(c for c in comps if c is not None)
    except IncomparableDirectionsError:
        return None


def _compute_closed(spec: ExerciseSpec, sub: Subproof) -> bool:
    if not sub.top or not sub.bottom:
        return False
    if not calc_equal(sub.top[-1].expr, sub.bottom[0].expr):
        return False
    top_binding = instance_binding(spec, sub.key, "lhs", sub.top[0].expr)
    bottom_binding = instance_binding(spec, sub.key, "rhs", sub.bottom[-1].expr)
    if top_binding is None or bottom_binding is None or top_binding != bottom_binding:
        return False
    folded = subproof_fold(sub)
    if folded is None:
        return False
    return comparator_implies(folded, spec.theorem.comp)


def ih_statement_for(spec: ExerciseSpec, metavar: str) -> Statement:
    return instantiate_statement(spec.theorem, {"phi": MetaVar(metavar)})


def ih_matches(spec: ExerciseSpec, stmt: Statement, metavar: str) -> bool:
    expected = ih_statement_for(spec, metavar)
    return (
        stmt.comp == expected.comp
        and calc_equal(stmt.lhs, expected.lhs)
        and calc_equal(stmt.rhs, expected.rhs)
    )


def ih_satisfied(spec: ExerciseSpec, state: ProofState, metavar: str) -> bool:
    return any(ih_matches(spec, stmt, metavar) for stmt in state.ih_block)


def missing_ih_metavars(spec: ExerciseSpec, state: ProofState) -> tuple[str, ...]:
    return tuple(m for m in required_ih_metavars(spec) if not ih_satisfied(spec, state, m))


def pattern_satisfied(spec: ExerciseSpec, state: ProofState, pattern: str) -> bool:
    distinguished = set(mandated_base_patterns(spec)) - {mandated_base_patterns(spec)[-1]}
    for sub in state.base_subproofs():
        if not sub.closed:
            continue
        if sub.key.label == pattern:
            return True
        # an undistinguished atom proves the generic pattern
        if pattern not in distinguished and sub.key.label not in distinguished:
            return True
    return False


def is_done(spec: ExerciseSpec, state: ProofState) -> bool:
    """Complete iff every mandated subproof is closed and the IH block
    contains the theorem for each required metavariable.  Motivations play
    no role here: a fully justified but unclosed subproof does not count."""
    for pattern in mandated_base_patterns(spec):
        if not pattern_satisfied(spec, state, pattern):
            return False
    for conn in spec.lang.connectives:
        sub = state.subproof(SubproofKey.case(conn))
        if sub is None or not sub.closed:
            return False
    return not missing_ih_metavars(spec, state)


def phase(spec: ExerciseSpec, state: ProofState) -> str:
    if is_done(spec, state):
        return "done"
    if not all(pattern_satisfied(spec, state, p) for p in mandated_base_patterns(spec)):
        return "base"
    if missing_ih_metavars(spec, state):
        return "ih"
    return "inductive"


# --- Serialization ---------------------------------------------------------------


def serialize(state: ProofState) -> str:
    """Line-oriented text form; deserialize() is its exact inverse."""
    out: list[str] = [f"exercise: {state.exercise_id}"]
    if state.focus is not None:
        out.append(f"focus: {state.focus.render()}")

    def emit_line(line: ProofLine, bottom: bool) -> None:
        if line.comparator is not None:
            motive = line.motivation.render()
            if motive is None:
                out.append(f"  {line.comparator}")
            else:
                out.append(f"  {line.comparator} ({motive})")
        marker = "^ " if bottom else ""
        out.append(f"  {marker}{print_expr(line.expr)}")

    for sub in state.subproofs:
        if sub.is_empty:
            continue
        out.append(f"{sub.key.render()}:")
        for line in sub.top:
            emit_line(line, bottom=False)
        for line in sub.bottom:
            emit_line(line, bottom=True)
    if state.ih_block:
        out.append("IH:")
        for stmt in state.ih_block:
            out.append(f"  {stmt.render()}")
    return "\n".join(out) + "\n"


def _parse_section_header(text: str, lineno: int) -> SubproofKey:
    body = text[:-1].strip()
    if body.startswith("base "):
        atom = body[5:].strip()
        if not atom.isidentifier():
            raise ProofParseError(f"invalid base pattern {atom!r}", lineno)
        return SubproofKey.base(atom)
    if body.startswith("case "):
        sym = body[5:].strip()
        conn = SYMBOL_TO_CONNECTIVE.get(sym)
        if conn is None:
            raise ProofParseError(f"unknown connective {sym!r}", lineno)
        return SubproofKey.case(conn)
    raise ProofParseError(f"unknown section {body!r}", lineno)


def deserialize(text: str, spec: ExerciseSpec) -> ProofState:
    """Parse a proof document against its exercise.

    Indentation width is irrelevant; section order and line order are
    preserved.  Raises ProofParseError with a 1-based line number.
    """
    kinds = spec.function_kinds
    lines = text.splitlines()
    state = new_proof(spec)
    subproofs = {sub.key: sub for sub in state.subproofs}
    order = [sub.key for sub in state.subproofs]
    ih_block: list[Statement] = []
    focus: SubproofKey | None = None

    exercise_id: str | None = None
    current: SubproofKey | None = None
    in_ih = False
    pending: tuple[str, Motivation, int] | None = None

    def close_pending(lineno: int) -> None:
        if pending is not None:
            raise ProofParseError("comparator line is not followed by an expression", pending[2])

    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if exercise_id is None:
            if not stripped.startswith("exercise:"):
                raise ProofParseError("document must start with 'exercise: <id>'", lineno)
            exercise_id = stripped[len("exercise:") :].strip()
            if exercise_id != spec.id:
                raise ProofParseError(f"document is for exercise {exercise_id!r}, not {spec.id!r}", lineno)
            continue
        if stripped.startswith("focus:"):
            close_pending(lineno)
            body = stripped[len("focus:") :].strip()
            try:
                focus = _parse_section_header(body + ":", lineno)
            except ProofParseError:
                raise
            continue
        if stripped == "IH:":
            close_pending(lineno)
            in_ih = True
            current = None
            continue
        if stripped.endswith(":"):
            close_pending(lineno)
            key = _parse_section_header(stripped, lineno)
            if key not in subproofs:
                subproofs[key] = Subproof(key)
                order.append(key)
            current = key
            in_ih = False
            continue
        if in_ih:
            try:
                ih_block.append(parse_statement(stripped, kinds))
            except ValueError as exc:
                raise ProofParseError(str(exc), lineno) from None
            continue
        if current is None:
            raise ProofParseError("proof line outside any section", lineno)

        is_bottom = stripped.startswith("^")
        body = stripped[1:].strip() if is_bottom else stripped
        comp_tok, _, motive_part = body.partition(" ")
        if not is_bottom and comp_tok in ("=", "<", "<=", ">", ">=") and (
            not motive_part or motive_part.lstrip().startswith("(")
        ):
            if pending is not None:
                raise ProofParseError("two comparator lines in a row", lineno)
            motive_part = motive_part.strip()
            motivation = UNJUSTIFIED
            if motive_part:
                if not (motive_part.startswith("(") and motive_part.endswith(")")):
                    raise ProofParseError("justification must be parenthesised", lineno)
                try:
                    motivation = parse_motivation(motive_part[1:-1])
                except ValueError as exc:
                    raise ProofParseError(str(exc), lineno) from None
            pending = (comp_tok, motivation, lineno)
            continue

        try:
            expr = parse_expr(body, kinds)
        except ValueError as exc:
            raise ProofParseError(str(exc), lineno) from None
        comparator, motivation = (None, UNJUSTIFIED)
        if pending is not None:
            comparator, motivation, _ = pending
            pending = None
        sub = subproofs[current]
        line = ProofLine(expr, comparator, motivation)
        if is_bottom:
            subproofs[current] = replace(sub, bottom=sub.bottom + (line,))
        else:
            subproofs[current] = replace(sub, top=sub.top + (line,))

    close_pending(len(lines))

    # enforce the comparator discipline per chain
    for key in order:
        sub = subproofs[key]
        for chain_name, chain in (("top", sub.top), ("bottom", sub.bottom)):
            for i, line in enumerate(chain):
                first = i == 0 if chain_name == "top" else i == len(chain) - 1
                if first and line.comparator is not None:
                    raise ProofParseError(
                        f"the {'first' if chain_name == 'top' else 'last'} line of "
                        f"{key.render()!r} cannot carry a comparator",
                        1,
                    )
                if not first and line.comparator is None:
                    raise ProofParseError(f"line in {key.render()!r} is missing its comparator", 1)

    closed_subs = []
    for key in order:
        sub = subproofs[key]
        closed_subs.append(replace(sub, closed=_compute_closed(spec, sub)))
    return ProofState(
        exercise_id=spec.id,
        subproofs=tuple(closed_subs),
        ih_block=tuple(ih_block),
        focus=focus,
    )
