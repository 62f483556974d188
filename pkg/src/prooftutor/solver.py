"""Proof-solving strategy: per subproof, state the goal, unfold the
definitions on both sides, distribute multiplications, rewrite with the
induction hypothesis left-to-right, and close the remaining gap with a
calculation step.  The same rule engine recognizes student steps and
produces next steps and tiered hints from any recognizable state."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .definitions import Registry, single_unfolds
from .exercises import (
    FORMULA,
    NUMERIC,
    TRUTH,
    ExerciseSpec,
    required_ih_metavars,
    validate_exercise,
)
from .proofstate import (
    BOTTOM,
    TOP,
    Motivation,
    ProofLine,
    ProofState,
    Subproof,
    SubproofKey,
    UNJUSTIFIED,
    add_line,
    ih_satisfied,
    ih_statement_for,
    instance_binding,
    instantiation_candidates,
    is_done,
    mandated_base_patterns,
    missing_ih_metavars,
    new_proof,
    pattern_satisfied,
    state_ih,
)
from .syntax import CONNECTIVE_SYMBOLS, IMP, NEG, Atom, Formula, MetaVar
from .terms import (
    FormulaExpr,
    LinearForm,
    MaxOf,
    MinOf,
    NumConst,
    ProofExpr,
    Scale,
    Statement,
    Sum,
    VApp,
    calc_equal,
    canonical_expr,
    comparator_implies,
    comparison_always_holds,
    compose_comparators,
    instantiate_statement,
    iter_subexprs,
    linear_to_expr,
    normalize,
    print_expr,
    replace_subexpr,
    replace_subformula,
    subst_metas_expr,
)


class NotProvableError(RuntimeError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class StateInvalidError(ValueError):
    """The state violates hard constraints; diagnose before asking for steps."""


class NoStepAvailableError(RuntimeError):
    """The strategy cannot continue from this state."""


@dataclass(frozen=True)
class Rule:
    kind: str  # 'unfold' | 'ih' | 'given' | 'distribute' | 'arithmetic'
    detail: str | None = None
    monotone: bool = False

    def describe(self) -> str:
        if self.kind == "unfold":
            return f"the definition of {self.detail}"
        if self.kind == "ih":
            return f"the induction hypothesis for {self.detail}"
        if self.kind == "given":
            return f"the given property of {self.detail}"
        if self.kind == "distribute":
            return "distribution of the multiplication"
        return "a normalizing calculation"


@dataclass(frozen=True)
class RuleApp:
    rule: Rule
    line: ProofLine


@dataclass(frozen=True)
class Step:
    """One strategy move: state a goal, add a line, or state a hypothesis."""

    kind: str  # 'goal' | 'line' | 'ih'
    key: SubproofKey | None
    end: str | None
    line: ProofLine | None
    statement: Statement | None
    rule: Rule | None
    hints: tuple[str, str, str]


PROOF_COMPLETE = None  # next_step returns None when nothing remains


# --- Rule applications at a chain end ----------------------------------------


def _unfold_apps(spec: ExerciseSpec, expr: ProofExpr) -> list[RuleApp]:
    apps = []
    for result, fn in single_unfolds(spec.registry, expr):
        apps.append(
            RuleApp(
                Rule("unfold", fn),
                ProofLine(result, "=", Motivation("definition", fn)),
            )
        )
    return apps


def _needs_distribution(expr: ProofExpr) -> bool:
    return any(
        isinstance(node, Scale) and isinstance(node.arg, Sum) for node in iter_subexprs(expr)
    )


def _distribute_app(expr: ProofExpr) -> RuleApp | None:
    if isinstance(expr, FormulaExpr) or not _needs_distribution(expr):
        return None
    result = canonical_expr(expr)
    if result == expr:
        return None
    return RuleApp(Rule("distribute"), ProofLine(result, "=", Motivation("distribution")))


def _ih_apps(spec: ExerciseSpec, expr: ProofExpr) -> list[RuleApp]:
    """Weak fertilization: replace the hypothesis' left-hand side by its
    right-hand side, never the other way around."""
    apps = []
    sort = spec.sort
    for metavar in required_ih_metavars(spec):
        ih = ih_statement_for(spec, metavar)
        if sort == FORMULA:
            if not isinstance(expr, FormulaExpr):
                continue
            assert isinstance(ih.lhs, FormulaExpr) and isinstance(ih.rhs, FormulaExpr)
            result, count = replace_subformula(expr, ih.lhs.formula, ih.rhs.formula)
            comp = "="
        else:
            positive_only = ih.comp != "="
            result, count = replace_subexpr(expr, ih.lhs, ih.rhs, positive_only=positive_only)
            comp = ih.comp
        if count == 0 or result == expr:
            continue
        monotone = sort == TRUTH and ih.comp != "=" and any(
            isinstance(node, (MinOf, MaxOf)) for node in iter_subexprs(expr)
        )
        apps.append(
            RuleApp(
                Rule("ih", metavar, monotone=monotone),
                ProofLine(result, comp, Motivation("ih")),
            )
        )
    return apps


def _given_apps(spec: ExerciseSpec, expr: ProofExpr) -> list[RuleApp]:
    apps = []
    if isinstance(expr, FormulaExpr):
        return apps
    for val in spec.valuations:
        for prop in val.properties:
            atoms = sorted(
                {
                    node.arg.name
                    for node in iter_subexprs(expr)
                    if isinstance(node, VApp) and node.fn == prop.left and isinstance(node.arg, Atom)
                }
            )
            if not atoms:
                continue
            result = expr
            total = 0
            for atom in atoms:
                target = VApp(prop.left, Atom(atom))
                replacement: ProofExpr
                if isinstance(prop.right, int):
                    replacement = NumConst(prop.right)
                else:
                    replacement = VApp(prop.right, Atom(atom))
                result, count = replace_subexpr(
                    result, target, replacement, positive_only=prop.comp != "="
                )
                total += count
            if total == 0 or result == expr:
                continue
            apps.append(
                RuleApp(
                    Rule("given", prop.left),
                    ProofLine(result, prop.comp, Motivation("given", prop.left)),
                )
            )
    return apps


_BRIDGE_CANDIDATES = {
    "=": (),
    "<=": ("<=",),
    "<": ("<", "<="),
    ">=": (">=",),
    ">": (">", ">="),
}


def _bridge_app(spec: ExerciseSpec, own_end: ProofExpr, opposite_end: ProofExpr) -> RuleApp | None:
    """Arithmetic meet: a final calculation line carrying the slack between
    the two chain ends, valid for every value of the symbolic terms."""
    if isinstance(own_end, FormulaExpr) or isinstance(opposite_end, FormulaExpr):
        return None
    top_form = normalize(own_end)
    bottom_form = normalize(opposite_end)
    if top_form == bottom_form:
        return None
    for comp in _BRIDGE_CANDIDATES[spec.theorem.comp]:
        if comparison_always_holds(top_form, comp, bottom_form):
            return RuleApp(
                Rule("arithmetic"),
                ProofLine(linear_to_expr(bottom_form), comp, Motivation("calculation")),
            )
    return None


def rule_applications(
    spec: ExerciseSpec, state: ProofState, sub: Subproof, end: str
) -> list[RuleApp]:
    """All single rule applications at the chosen chain end.

    The top chain admits every rule; the bottom chain only rewrites the
    right-hand side downward (definitions, distribution, and the final
    arithmetic meet), so the hypothesis is never applied in reverse.
    """
    if end == TOP:
        if not sub.top:
            return []
        own = sub.top[-1].expr
        opposite = sub.bottom[0].expr if sub.bottom else None
    else:
        if not sub.bottom:
            return []
        own = sub.bottom[0].expr
        opposite = sub.top[-1].expr if sub.top else None

    apps = _unfold_apps(spec, own)
    dist = _distribute_app(own)
    if dist is not None:
        apps.append(dist)
    if end == TOP:
        apps.extend(_ih_apps(spec, own))
        apps.extend(_given_apps(spec, own))
    if opposite is not None:
        if end == TOP:
            bridge = _bridge_app(spec, own, opposite)
        else:
            # the new line sits above the bottom end: it restates the top
            # end canonically and the comparator still reads downward
            bridge = None
            if not isinstance(own, FormulaExpr) and not isinstance(opposite, FormulaExpr):
                top_form = normalize(opposite)
                bottom_form = normalize(own)
                if top_form != bottom_form:
                    for comp in _BRIDGE_CANDIDATES[spec.theorem.comp]:
                        if comparison_always_holds(top_form, comp, bottom_form):
                            bridge = RuleApp(
                                Rule("arithmetic"),
                                ProofLine(linear_to_expr(top_form), comp, Motivation("calculation")),
                            )
                            break
        if bridge is not None:
            apps.append(bridge)
    return apps


# --- Strategy: next step -------------------------------------------------------


def _case_statement(spec: ExerciseSpec, key: SubproofKey, sub: Subproof | None) -> Statement:
    binding: Formula | None = None
    if sub is not None and sub.top:
        binding = instance_binding(spec, key, "lhs", sub.top[0].expr)
    if binding is None and sub is not None and sub.bottom:
        binding = instance_binding(spec, key, "rhs", sub.bottom[-1].expr)
    if binding is None:
        binding = instantiation_candidates(spec, key)[0]
    return instantiate_statement(spec.theorem, {"phi": binding})


def _goal_step(spec: ExerciseSpec, key: SubproofKey, sub: Subproof | None) -> Step:
    stmt = _case_statement(spec, key, sub)
    what = "in the base case" if key.kind == "base" else (
        f"in the inductive case for {CONNECTIVE_SYMBOLS[key.label]}"
    )
    return Step(
        kind="goal",
        key=key,
        end=None,
        line=None,
        statement=stmt,
        rule=None,
        hints=(
            f"State what must be proven {what}.",
            f"Instantiate both sides of the theorem {what}.",
            stmt.render(),
        ),
    )


def _endpoint_step(spec: ExerciseSpec, key: SubproofKey, sub: Subproof, end: str) -> Step:
    stmt = _case_statement(spec, key, sub)
    expr = stmt.lhs if end == TOP else stmt.rhs
    side = "left-hand" if end == TOP else "right-hand"
    line = ProofLine(expr, None, UNJUSTIFIED)
    return Step(
        kind="line",
        key=key,
        end=end,
        line=line,
        statement=None,
        rule=None,
        hints=(
            f"Complete the statement of the {key.render()}.",
            f"State the instantiated {side} side of the theorem.",
            print_expr(expr),
        ),
    )


def _ih_step(spec: ExerciseSpec, metavar: str) -> Step:
    stmt = ih_statement_for(spec, metavar)
    return Step(
        kind="ih",
        key=None,
        end=None,
        line=None,
        statement=stmt,
        rule=None,
        hints=(
            "State the induction hypothesis.",
            f"Assume the theorem for {metavar}.",
            stmt.render(),
        ),
    )


def _line_step(spec: ExerciseSpec, key: SubproofKey, end: str, app: RuleApp) -> Step:
    where = "top" if end == TOP else "bottom"
    comp = app.line.comparator or "="
    return Step(
        kind="line",
        key=key,
        end=end,
        line=app.line,
        statement=None,
        rule=app.rule,
        hints=(
            f"Continue the {key.render()} (working {('downward' if end == TOP else 'upward')}).",
            f"Apply {app.rule.describe()}.",
            f"{comp} {print_expr(app.line.expr)}",
        ),
    )


def _subproof_step(spec: ExerciseSpec, state: ProofState, sub: Subproof) -> Step | None:
    """The strategy's next move inside one unfinished subproof."""
    key = sub.key
    if not sub.top and not sub.bottom:
        return _goal_step(spec, key, sub)
    if not sub.top:
        return _endpoint_step(spec, key, sub, TOP)
    if not sub.bottom:
        return _endpoint_step(spec, key, sub, BOTTOM)

    for end in (TOP, BOTTOM):
        for app in _unfold_apps(spec, (sub.top[-1] if end == TOP else sub.bottom[0]).expr):
            return _line_step(spec, key, end, app)
    for end in (BOTTOM, TOP):
        own = (sub.top[-1] if end == TOP else sub.bottom[0]).expr
        app = _distribute_app(own)
        if app is not None:
            return _line_step(spec, key, end, app)
    ih_apps = _ih_apps(spec, sub.top[-1].expr)
    if ih_apps:
        app = ih_apps[0]
        if not ih_satisfied(spec, state, app.rule.detail or "phi"):
            return _ih_step(spec, app.rule.detail or "phi")
        return _line_step(spec, key, TOP, app)
    for app in _given_apps(spec, sub.top[-1].expr):
        return _line_step(spec, key, TOP, app)
    bridge = _bridge_app(spec, sub.top[-1].expr, sub.bottom[0].expr)
    if bridge is not None:
        return _line_step(spec, key, TOP, bridge)
    return None


def _obligation_keys(spec: ExerciseSpec, state: ProofState) -> list[SubproofKey]:
    """Unfinished subproofs in strategy order: bases, then cases in language
    order; base subproofs the student opened come before untouched shells."""
    keys: list[SubproofKey] = []
    for sub in state.base_subproofs():
        if not sub.closed and not sub.is_empty:
            keys.append(sub.key)
    for pattern in mandated_base_patterns(spec):
        key = SubproofKey.base(pattern)
        if not pattern_satisfied(spec, state, pattern) and key not in keys:
            keys.append(key)
    for conn in spec.lang.connectives:
        key = SubproofKey.case(conn)
        sub = state.subproof(key)
        if sub is None or not sub.closed:
            keys.append(key)
    return keys


def next_step(spec: ExerciseSpec, state: ProofState, *, check_state: bool = True) -> Step | None:
    """The strategy's next move from any recognizable state, or None when
    the proof is complete.  Raises StateInvalidError when the state has
    constraint violations (the caller should diagnose first)."""
    if check_state:
        from .diagnosis import has_violations

        if has_violations(spec, state):
            raise StateInvalidError("state has constraint violations; diagnose first")
    return _next_step_unchecked(spec, state)


def _next_step_unchecked(spec: ExerciseSpec, state: ProofState) -> Step | None:
    if is_done(spec, state):
        return PROOF_COMPLETE
    keys = _obligation_keys(spec, state)
    # the latest touched subproof wins, then strategy order
    if state.focus is not None and state.focus in keys:
        keys = [state.focus] + [k for k in keys if k != state.focus]

    ih_missing = missing_ih_metavars(spec, state)
    bases_pending = any(k.kind == "base" for k in keys)
    # canonical order states the hypotheses right after the base cases
    if ih_missing and not bases_pending and (state.focus is None or state.focus not in keys):
        return _ih_step(spec, ih_missing[0])

    for key in keys:
        sub = state.subproof(key) or Subproof(key)
        step = _subproof_step(spec, state, sub)
        if step is not None:
            return step
    if ih_missing:
        return _ih_step(spec, ih_missing[0])
    raise NoStepAvailableError("no strategy rule applies to this state")


def apply_step(spec: ExerciseSpec, state: ProofState, step: Step) -> ProofState:
    if step.kind == "goal":
        assert step.statement is not None and step.key is not None
        state = add_line(spec, state, step.key, TOP, ProofLine(step.statement.lhs))
        return add_line(spec, state, step.key, BOTTOM, ProofLine(step.statement.rhs))
    if step.kind == "ih":
        assert step.statement is not None
        return state_ih(state, step.statement)
    assert step.line is not None and step.key is not None and step.end is not None
    return add_line(spec, state, step.key, step.end, step.line)


def hint(spec: ExerciseSpec, state: ProofState, tier: int = 1, *, check_state: bool = True) -> str:
    """Tier 1 names the obligation, tier 2 the rule, tier 3 the full line."""
    step = next_step(spec, state, check_state=check_state)
    if step is None:
        return "The proof is complete."
    tier = max(1, min(3, tier))
    return step.hints[tier - 1]


# --- Full derivation -------------------------------------------------------------


def derivation(spec: ExerciseSpec, *, verify: bool = False, max_steps: int = 500) -> ProofState:
    """Generate a complete proof; complete for true statements of the
    supported class.  Raises NotProvableError otherwise."""
    problems = validate_exercise(spec)
    if problems:
        raise NotProvableError(f"exercise is outside the supported class: {problems[0].code}")
    if spec.sort == TRUTH and spec.theorem.comp != "=":
        unsupported = {NEG, IMP} & set(spec.lang.connectives)
        if unsupported:
            raise NotProvableError("UnsupportedMonotonicity")
    if verify:
        from .exercises import verify_by_enumeration

        if not verify_by_enumeration(spec, max_size=3, num_atoms=2):
            raise NotProvableError("the statement is false")
    state = new_proof(spec)
    for _ in range(max_steps):
        try:
            step = _next_step_unchecked(spec, state)
        except NoStepAvailableError as exc:
            raise NotProvableError(str(exc)) from None
        if step is None:
            return state
        state = apply_step(spec, state, step)
    raise NotProvableError("derivation did not finish within the step budget")


# --- Step recognition ---------------------------------------------------------------


@dataclass(frozen=True)
class Recognition:
    """A student line explained as a sequence of rule applications whose
    downward-reading relation composes to ``comparator``."""

    rules: tuple[Rule, ...]
    comparator: str

    @property
    def depth(self) -> int:
        return len(self.rules)


def recognize_line(
    spec: ExerciseSpec,
    sub: Subproof,
    end: str,
    previous: ProofExpr,
    candidate: ProofExpr,
    opposite_end: ProofExpr | None,
    max_depth: int = 4,
    max_states: int = 600,
) -> list[Recognition]:
    """All shortest rule paths from the chain end to the candidate line,
    comparing modulo normalization."""

    def matches(e: ProofExpr) -> bool:
        return calc_equal(e, candidate)

    results: list[Recognition] = []
    if matches(previous):
        results.append(Recognition((), "="))
        return results

    def norm_key(e: ProofExpr):
        if isinstance(e, FormulaExpr):
            return e
        return normalize(e)

    frontier: list[tuple[ProofExpr, tuple[Rule, ...], str]] = [(previous, (), "=")]
    visited = {norm_key(previous)}
    explored = 0
    for _ in range(max_depth):
        next_frontier: list[tuple[ProofExpr, tuple[Rule, ...], str]] = []
        for expr, rules, comp in frontier:
            apps = _unfold_apps(spec, expr)
            dist = _distribute_app(expr)
            if dist is not None:
                apps.append(dist)
            if end == TOP:
                apps.extend(_ih_apps(spec, expr))
                apps.extend(_given_apps(spec, expr))
            if opposite_end is not None and not isinstance(expr, FormulaExpr):
                own_form = normalize(expr)
                other_form = None
                if not isinstance(opposite_end, FormulaExpr):
                    other_form = normalize(opposite_end)
                if other_form is not None and own_form != other_form:
                    top_form = own_form if end == TOP else other_form
                    bottom_form = other_form if end == TOP else own_form
                    for comp_c in _BRIDGE_CANDIDATES[spec.theorem.comp]:
                        if comparison_always_holds(top_form, comp_c, bottom_form):
                            target = bottom_form if end == TOP else top_form
                            apps.append(
                                RuleApp(
                                    Rule("arithmetic"),
                                    ProofLine(linear_to_expr(target), comp_c, Motivation("calculation")),
                                )
                            )
                            break
            for app in apps:
                explored += 1
                if explored > max_states:
                    return results
                new_expr = app.line.expr
                try:
                    new_comp = compose_comparators(comp, app.line.comparator or "=")
                except Exception:
                    continue
                new_rules = rules + (app.rule,)
                if matches(new_expr):
                    results.append(Recognition(new_rules, new_comp))
                    continue
                key = norm_key(new_expr)
                if key in visited:
                    continue
                visited.add(key)
                next_frontier.append((new_expr, new_rules, new_comp))
        if results:
            return results
        frontier = next_frontier
        if not frontier:
            break
    return results


@dataclass(frozen=True)
class LineDiff:
    key: SubproofKey
    chain: str
    index: int  # position within the submitted chain
    line: ProofLine
    previous: ProofExpr | None  # chain predecessor, None for endpoint statements


def recognize_step(
    spec: ExerciseSpec, prev: ProofState, submission: ProofState
) -> list[tuple[LineDiff, list[Recognition]]]:
    """Explain each new line of the submission; an empty recognition list
    means the line was not derivable by any rule path."""
    from .diagnosis import proof_diff

    new_lines, _, _ = proof_diff(prev, submission)
    results = []
    for diff in new_lines:
        sub = submission.subproof(diff.key)
        assert sub is not None
        if diff.previous is None:
            results.append((diff, []))
            continue
        opposite = None
        if diff.chain == TOP and sub.bottom:
            opposite = sub.bottom[0].expr
        elif diff.chain == BOTTOM and sub.top:
            opposite = sub.top[-1].expr
        recs = recognize_line(spec, sub, diff.chain, diff.previous, diff.line.expr, opposite)
        results.append((diff, recs))
    return results


# --- Reachable-state fuzzing -----------------------------------------------------


@dataclass
class FuzzReport:
    attempted: int = 0
    answered: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and self.answered == self.attempted


def _fuzz_actions(
    spec: ExerciseSpec, state: ProofState, rng: random.Random
) -> list[Callable[[], ProofState]]:
    """Valid rule applications available from a state, in random order:
    endpoint statements, chain rules on both ends, and hypothesis stating."""
    actions: list[Callable[[], ProofState]] = []
    for sub in state.subproofs:
        if sub.closed:
            continue
        key = sub.key
        if not sub.top:
            stmt = _case_statement(spec, key, sub)
            actions.append(lambda s=state, k=key, e=stmt.lhs: add_line(spec, s, k, TOP, ProofLine(e)))
        if not sub.bottom:
            stmt = _case_statement(spec, key, sub)
            actions.append(
                lambda s=state, k=key, e=stmt.rhs: add_line(spec, s, k, BOTTOM, ProofLine(e))
            )
        if sub.top and sub.bottom:
            for end in (TOP, BOTTOM):
                for app in rule_applications(spec, state, sub, end):
                    if app.rule.kind == "ih":
                        metavar = app.rule.detail or "phi"
                        if not ih_satisfied(spec, state, metavar):
                            continue
                    actions.append(
                        lambda s=state, k=key, e=end, l=app.line: add_line(spec, s, k, e, l)
                    )
    for metavar in missing_ih_metavars(spec, state):
        stmt = ih_statement_for(spec, metavar)
        actions.append(lambda s=state, t=stmt: state_ih(s, t))
    rng.shuffle(actions)
    return actions


def fuzz_hint_totality(
    specs: Sequence[ExerciseSpec], states: int = 1000, seed: int = 0
) -> FuzzReport:
    """Drive random valid rule applications (detours included) and demand a
    next step or completion from every reached state."""
    rng = random.Random(seed)
    report = FuzzReport()
    while report.attempted < states:
        spec = rng.choice(list(specs))
        state = new_proof(spec)
        for _ in range(rng.randint(1, 30)):
            if report.attempted >= states:
                break
            actions = _fuzz_actions(spec, state, rng)
            if not actions:
                break
            state = actions[0]()
            report.attempted += 1
            try:
                step = _next_step_unchecked(spec, state)
            except Exception as exc:  # noqa: BLE001 - the fuzz records any failure
                report.failures.append(f"{spec.id}: {type(exc).__name__}: {exc}")
                continue
            if step is None:
                if is_done(spec, state):
                    report.answered += 1
                else:
                    report.failures.append(f"{spec.id}: no step on an unfinished state")
                continue
            try:
                for tier in (1, 2, 3):
                    text = step.hints[tier - 1]
                    if not text:
                        raise ValueError(f"empty tier-{tier} hint")
                apply_step(spec, state, step)
            except Exception as exc:  # noqa: BLE001
                report.failures.append(f"{spec.id}: unusable step: {exc}")
                continue
            report.answered += 1
    return report
