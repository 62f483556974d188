"""Exercise model: the restricted theorem class, validation, case analysis,
brute-force enumeration oracle, and random exercise generation."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

from .definitions import (
    CountingFunctionDef,
    FunctionDef,
    IDENTITY_TRANSFORM,
    Registry,
    TransformFunctionDef,
    ValuationDef,
    ValuationProperty,
    eval_expr,
    eval_formula_expr,
)
from .syntax import (
    BINARY_CONNECTIVES,
    CONNECTIVES,
    NEG,
    Atom,
    Bin,
    Formula,
    LanguageSpec,
    MetaVar,
    Neg,
    SubstVar,
    TApp,
    connectives_in,
    iter_subformulas,
    print_formula,
)
from .terms import (
    FApp,
    FormulaExpr,
    NumConst,
    ProofExpr,
    Statement,
    VApp,
    affine_expr,
    comparator_holds,
    expr_metavars,
    instantiate_statement,
    iter_subexprs,
    normalize,
    statement_metavars,
)

NUMERIC = "numeric"
TRUTH = "truth"
FORMULA = "formula"


@dataclass(frozen=True)
class ExerciseSpec:
    id: str
    description: str
    lang: LanguageSpec
    functions: tuple[Union[CountingFunctionDef, TransformFunctionDef], ...]
    valuations: tuple[ValuationDef, ...] = ()
    theorem: Statement = None  # type: ignore[assignment]

    @property
    def registry(self) -> dict[str, FunctionDef]:
        reg: dict[str, FunctionDef] = {f.name: f for f in self.functions}
        reg.update({v.name: v for v in self.valuations})
        return reg

    @property
    def function_kinds(self) -> dict[str, str]:
        return {name: fn.kind for name, fn in self.registry.items()}

    @property
    def sort(self) -> str:
        if isinstance(self.theorem.lhs, FormulaExpr):
            return FORMULA
        for side in (self.theorem.lhs, self.theorem.rhs):
            if any(isinstance(e, VApp) for e in iter_subexprs(side)):
                return TRUTH
        return NUMERIC


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str


@dataclass(frozen=True)
class CasePlan:
    """What an inductive proof of the exercise must contain."""

    base_cases: tuple[tuple[str, Statement], ...]
    ih_statements: tuple[Statement, ...]
    inductive_cases: tuple[tuple[str, Statement], ...]


class GenerationFailedError(RuntimeError):
    def __init__(self, seed: int):
        super().__init__(f"could not generate a valid exercise from seed {seed}")
        self.seed = seed


# --- Theorem shape helpers --------------------------------------------------


def transform_chain(formula: Formula) -> list[str] | None:
    """Function names of a pure application chain over phi; None otherwise."""
    names: list[str] = []
    current = formula
    while isinstance(current, TApp):
        names.append(current.fn)
        current = current.arg
    if isinstance(current, MetaVar) and current.name == "phi":
        return names
    return None


def _is_single_chain(expr: ProofExpr) -> bool:
    if isinstance(expr, (FApp, VApp)):
        return transform_chain(expr.arg) is not None
    return False


def _rhs_terms(expr: ProofExpr) -> list[ProofExpr] | None:
    """Atomic application terms of a linear combination, or None if nonlinear."""
    try:
        form = normalize(expr)
    except Exception:
        return None
    return [key for key, _ in form.terms]


# --- Validation --------------------------------------------------------------


def validate_exercise(spec: ExerciseSpec) -> list[Violation]:
    """Check every restriction of the supported theorem class."""
    violations: list[Violation] = []
    registry = spec.registry

    # every function name used in the theorem must exist
    for side in (spec.theorem.lhs, spec.theorem.rhs):
        for node in _application_nodes(side):
            name = node.fn
            if name not in registry:
                violations.append(Violation("UnknownFunction", f"'{name}' is not defined"))

    if any(v.code == "UnknownFunction" for v in violations):
        return violations

    metas = statement_metavars(spec.theorem)
    if metas != {"phi"}:
        violations.append(
            Violation("TheoremMetavariables", "the theorem must range over exactly the metavariable phi")
        )

    sort = spec.sort
    if sort == FORMULA:
        if spec.theorem.comp != "=":
            violations.append(Violation("FormulaEqualityOnly", "formula theorems use syntactic equality"))
        for label, side in (("left", spec.theorem.lhs), ("right", spec.theorem.rhs)):
            if not isinstance(side, FormulaExpr) or transform_chain(side.formula) is None:
                violations.append(
                    Violation("LhsNotSingleTerm", f"the {label}-hand side must be a chain of transforms over phi")
                )
    elif sort == TRUTH:
        for label, side in (("left", spec.theorem.lhs), ("right", spec.theorem.rhs)):
            if isinstance(side, NumConst):
                if side.value not in (0, 1):
                    violations.append(Violation("SortMismatch", f"truth constant {side.value} is not 0 or 1"))
            elif not (isinstance(side, VApp) and _is_single_chain(side)):
                violations.append(
                    Violation("LhsNotSingleTerm", f"the {label}-hand side must be a valuation chain or constant")
                )
    else:
        if not _is_single_chain(spec.theorem.lhs):
            violations.append(
                Violation("LhsNotSingleTerm", "the left-hand side must be a single counting-function chain")
            )
        rhs_terms = _rhs_terms(spec.theorem.rhs)
        if rhs_terms is None:
            violations.append(Violation("RhsNotLinear", "the right-hand side is not a linear combination"))
        else:
            for term in rhs_terms:
                if not _is_single_chain(term):
                    violations.append(
                        Violation("RhsNotLinear", f"term {term!r} is not a counting-function chain")
                    )

    # equality theorems may only rely on equality properties
    if spec.theorem.comp == "=":
        for val in spec.valuations:
            for prop in val.properties:
                if prop.comp != "=":
                    violations.append(
                        Violation(
                            "EqualityNeedsEqualityProperties",
                            f"property of '{val.name}' uses '{prop.comp}' in an equality exercise",
                        )
                    )

    # properties may only reference known valuations
    for val in spec.valuations:
        for prop in val.properties:
            if isinstance(prop.right, str) and prop.right not in {v.name for v in spec.valuations}:
                violations.append(
                    Violation("ValuationPropertyUnknown", f"property references unknown valuation '{prop.right}'")
                )

    violations.extend(_coverage_violations(spec))
    violations.extend(_definition_violations(spec))
    return violations


def _application_nodes(expr: ProofExpr) -> Iterator[Union[FApp, VApp, TApp]]:
    for node in iter_subexprs(expr):
        if isinstance(node, (FApp, VApp)):
            yield node
            yield from _tapps_in(node.arg)
        elif isinstance(node, FormulaExpr):
            yield from _tapps_in(node.formula)


def _tapps_in(formula: Formula) -> Iterator[TApp]:
    for sub in iter_subformulas(formula):
        if isinstance(sub, TApp):
            yield sub


def _coverage_violations(spec: ExerciseSpec) -> list[Violation]:
    """Every function must cover every connective it can encounter."""
    violations = []
    registry = spec.registry

    def reachable_connectives(chain: Sequence[str]) -> set[str]:
        # innermost function sees the exercise language; each transform
        # maps into its codomain
        current = set(spec.lang.connectives)
        for name in reversed(chain):
            fn = registry.get(name)
            if isinstance(fn, TransformFunctionDef):
                current = set(fn.codomain)
        return current

    for side in (spec.theorem.lhs, spec.theorem.rhs):
        for node in _application_nodes(side):
            if isinstance(node, TApp):
                continue
            chain = transform_chain(node.arg) or []
            needed = reachable_connectives(chain)
            fn = registry[node.fn]
            if isinstance(fn, CountingFunctionDef):
                missing = needed - fn.covered_connectives
                if missing:
                    violations.append(
                        Violation("MissingFunctionCase", f"'{fn.name}' lacks cases for {sorted(missing)}")
                    )
        # transforms must cover the language they are applied to
        for node in _application_nodes(side):
            if isinstance(node, TApp):
                inner_chain = transform_chain(node.arg)
                fn = registry.get(node.fn)
                if isinstance(fn, TransformFunctionDef):
                    needed = set(spec.lang.connectives)
                    if inner_chain:
                        inner = registry.get(inner_chain[0])
                        if isinstance(inner, TransformFunctionDef):
                            needed = set(inner.codomain)
                    missing = needed - fn.covered_connectives
                    if missing:
                        violations.append(
                            Violation("MissingFunctionCase", f"'{fn.name}' lacks cases for {sorted(missing)}")
                        )
    # deduplicate
    unique: list[Violation] = []
    for v in violations:
        if v not in unique:
            unique.append(v)
    return unique


def _definition_violations(spec: ExerciseSpec) -> list[Violation]:
    violations = []
    for fn in spec.functions:
        if isinstance(fn, CountingFunctionDef):
            coeffs = [fn.atom_default, *fn.atom_cases.values()]
            if fn.neg_case:
                coeffs.extend(fn.neg_case)
            for case in fn.bin_cases.values():
                coeffs.extend(case)
            if any(c < 0 for c in coeffs):
                violations.append(Violation("BadCoefficients", f"'{fn.name}' has negative coefficients"))
        elif isinstance(fn, TransformFunctionDef):
            templates = [("atom", fn.atom_template)]
            if fn.neg_template is not None:
                templates.append(("neg", fn.neg_template))
            templates.extend(fn.bin_templates.items())
            for case, template in templates:
                outside = connectives_in(template) - set(fn.codomain)
                if outside:
                    violations.append(
                        Violation(
                            "TemplateConnectives",
                            f"template for {case} of '{fn.name}' uses {sorted(outside)} outside its codomain",
                        )
                    )
                slots = {f.name for f in iter_subformulas(template) if isinstance(f, SubstVar)}
                allowed = {"s"} if case in ("atom", "neg") else {"s1", "s2"}
                if not slots <= allowed:
                    violations.append(
                        Violation("TemplateSlots", f"template for {case} of '{fn.name}' uses slots {sorted(slots)}")
                    )
    return violations


# --- Case analysis ------------------------------------------------------------


def mandated_base_patterns(spec: ExerciseSpec) -> tuple[str, ...]:
    """Atom patterns requiring their own base case.

    Counting functions with per-atom constants distinguish those atoms;
    otherwise a single generic atom stands for all of them.
    """
    distinguished: list[str] = []
    for fn in spec.functions:
        if isinstance(fn, CountingFunctionDef):
            for atom in fn.atom_cases:
                if atom not in distinguished:
                    distinguished.append(atom)
    generic = next((a for a in spec.lang.atoms if a not in distinguished), spec.lang.atoms[0])
    patterns = [*distinguished]
    if generic not in patterns:
        patterns.append(generic)
    return tuple(patterns)


def case_formula(conn: str) -> Formula:
    if conn == NEG:
        return Neg(MetaVar("phi"))
    return Bin(conn, MetaVar("phi"), MetaVar("psi"))


def required_ih_metavars(spec: ExerciseSpec) -> tuple[str, ...]:
    if spec.lang.binary_connectives:
        return ("phi", "psi")
    return ("phi",)


def case_analysis(spec: ExerciseSpec) -> CasePlan:
    theorem = spec.theorem
    base_cases = tuple(
        (atom, instantiate_statement(theorem, {"phi": Atom(atom)})) for atom in mandated_base_patterns(spec)
    )
    ih_statements = tuple(
        instantiate_statement(theorem, {"phi": MetaVar(name)}) for name in required_ih_metavars(spec)
    )
    inductive = tuple(
        (conn, instantiate_statement(theorem, {"phi": case_formula(conn)})) for conn in spec.lang.connectives
    )
    return CasePlan(base_cases, ih_statements, inductive)


# --- Enumeration oracle --------------------------------------------------------


def formulas_by_size(lang: LanguageSpec, atoms: Sequence[str], max_size: int) -> list[list[Formula]]:
    """All concrete formulas grouped by connective count."""
    levels: list[list[Formula]] = [[Atom(a) for a in atoms]]
    for size in range(1, max_size + 1):
        level: list[Formula] = []
        if lang.has(NEG):
            level.extend(Neg(f) for f in levels[size - 1])
        for conn in lang.binary_connectives:
            for left_size in range(size):
                right_size = size - 1 - left_size
                for left in levels[left_size]:
                    for right in levels[right_size]:
                        level.append(Bin(conn, left, right))
        levels.append(level)
    return levels


def enumerate_formulas(lang: LanguageSpec, atoms: Sequence[str] | None = None, max_size: int = 4) -> Iterator[Formula]:
    atoms = tuple(atoms) if atoms is not None else lang.atoms
    for level in formulas_by_size(lang, atoms, max_size):
        yield from level


def valuation_assignments(
    spec: ExerciseSpec, atoms: Sequence[str]
) -> list[dict[str, dict[str, int]]]:
    """Joint truth assignments for all declared valuations, filtered by
    the per-atom properties."""
    names = [v.name for v in spec.valuations]
    if not names:
        return [{}]
    cells = [(name, atom) for name in names for atom in atoms]
    results = []
    for mask in range(2 ** len(cells)):
        env: dict[str, dict[str, int]] = {name: {} for name in names}
        for i, (name, atom) in enumerate(cells):
            env[name][atom] = (mask >> i) & 1
        if _satisfies_properties(spec, env, atoms):
            results.append(env)
    return results


def _satisfies_properties(
    spec: ExerciseSpec, env: Mapping[str, Mapping[str, int]], atoms: Sequence[str]
) -> bool:
    for val in spec.valuations:
        for prop in val.properties:
            for atom in atoms:
                left = env[prop.left][atom]
                right = prop.right if isinstance(prop.right, int) else env[prop.right][atom]
                if not comparator_holds(prop.comp, left, right):
                    return False
    return True


def eval_statement(
    spec: ExerciseSpec,
    stmt: Statement,
    meta_env: Mapping[str, Formula],
    val_env: Mapping[str, Mapping[str, int]] | None = None,
) -> bool:
    registry = spec.registry
    if isinstance(stmt.lhs, FormulaExpr) or isinstance(stmt.rhs, FormulaExpr):
        left = eval_formula_expr(registry, stmt.lhs, meta_env)
        right = eval_formula_expr(registry, stmt.rhs, meta_env)
        return (left == right) if stmt.comp == "=" else False
    left_val = eval_expr(registry, stmt.lhs, meta_env, val_env)
    right_val = eval_expr(registry, stmt.rhs, meta_env, val_env)
    return comparator_holds(stmt.comp, left_val, right_val)


def verify_by_enumeration(spec: ExerciseSpec, max_size: int = 4, num_atoms: int = 2) -> bool:
    """Check the theorem by direct evaluation on every concrete formula up
    to the size bound, against every admissible valuation assignment."""
    atoms = spec.lang.atoms[:num_atoms]
    val_envs = valuation_assignments(spec, atoms)
    for formula in enumerate_formulas(spec.lang, atoms, max_size):
        for val_env in val_envs:
            if not eval_statement(spec, spec.theorem, {"phi": formula}, val_env):
                return False
    return True


# --- Random generation -----------------------------------------------------------


@dataclass(frozen=True)
class GenerationParams:
    lang_size: int = 3
    coeff_bound: int = 3
    term_count: int = 2
    allow_transform: bool = True


def generate_exercise(seed: int, params: GenerationParams = GenerationParams()) -> ExerciseSpec:
    """Build a random, provably true counting-function exercise.

    The right-hand side is drawn first; the left-hand function is then
    defined case by case so the relation holds exactly, after which the
    comparator may be slackened away from equality.
    """
    rng = random.Random(seed)
    for _ in range(50):
        spec = _generate_once(rng, params, seed)
        if spec is None:
            continue
        if validate_exercise(spec):
            continue
        if verify_by_enumeration(spec, max_size=4, num_atoms=2):
            return spec
    raise GenerationFailedError(seed)


def _generate_once(rng: random.Random, params: GenerationParams, seed: int) -> ExerciseSpec | None:
    size = rng.randint(1, max(1, params.lang_size))
    chosen = set(rng.sample(CONNECTIVES, size))
    conns = tuple(c for c in CONNECTIVES if c in chosen)
    lang = LanguageSpec(("p", "q"), conns)
    bound = params.coeff_bound

    transform = None
    if params.allow_transform and rng.random() < 0.5:
        transform = _random_transform(rng, lang)

    # shared recursion multipliers keep the combination inductively closed
    neg_mult = rng.randint(0, bound) if lang.has(NEG) else None
    bin_mults = {c: (rng.randint(0, bound), rng.randint(0, bound)) for c in lang.binary_connectives}

    count = rng.randint(1, max(1, params.term_count))
    rhs_fns = []
    for i in range(count):
        rhs_fns.append(
            CountingFunctionDef(
                name=f"f{i + 1}",
                atom_default=rng.randint(0, bound),
                neg_case=(rng.randint(0, bound), neg_mult) if neg_mult is not None else None,
                bin_cases={
                    c: (rng.randint(0, bound), bin_mults[c][0], bin_mults[c][1])
                    for c in lang.binary_connectives
                },
            )
        )
    weights = [rng.randint(1, bound) for _ in rhs_fns]

    lhs_fn = CountingFunctionDef(
        name="h",
        atom_default=sum(w * f.atom_default for w, f in zip(weights, rhs_fns)),
        neg_case=(
            (sum(w * f.neg_case[0] for w, f in zip(weights, rhs_fns)), neg_mult)
            if neg_mult is not None
            else None
        ),
        bin_cases={
            c: (
                sum(w * f.bin_cases[c][0] for w, f in zip(weights, rhs_fns)),
                bin_mults[c][0],
                bin_mults[c][1],
            )
            for c in lang.binary_connectives
        },
    )

    arg: Formula = MetaVar("phi")
    if transform is not None:
        arg = TApp(transform.name, MetaVar("phi"))
    comp = rng.choice(("=", "<=", "<", ">=", ">"))
    slack = 0
    if comp == "<=":
        slack = rng.randint(0, 2)
    elif comp == "<":
        slack = rng.randint(1, 3)
    elif comp == ">=":
        slack = -rng.randint(0, 2)
    elif comp == ">":
        slack = -rng.randint(1, 3)

    theorem = Statement(
        FApp("h", arg),
        comp,
        affine_expr(slack, [(w, FApp(f.name, arg)) for w, f in zip(weights, rhs_fns)]),
    )
    functions: list[Union[CountingFunctionDef, TransformFunctionDef]] = [lhs_fn, *rhs_fns]
    if transform is not None:
        functions.append(transform)
    return ExerciseSpec(
        id=f"gen-{seed}",
        description=f"Generated counting exercise (seed {seed}).",
        lang=lang,
        functions=tuple(functions),
        valuations=(),
        theorem=theorem,
    )


def _random_transform(rng: random.Random, lang: LanguageSpec) -> TransformFunctionDef:
    s, s1, s2 = SubstVar("s"), SubstVar("s1"), SubstVar("s2")
    atom_pool: list[Formula] = [s]
    neg_pool: list[Formula] = [s]
    if lang.has(NEG):
        atom_pool.append(Neg(s))
        neg_pool.extend([Neg(s), Neg(Neg(s))])
    bin_pool: list[Formula] = []
    for conn in lang.binary_connectives:
        bin_pool.append(Bin(conn, s1, s2))
        bin_pool.append(Bin(conn, s2, s1))
        if lang.has(NEG):
            bin_pool.append(Neg(Bin(conn, s1, s2)))
    return TransformFunctionDef(
        name="g",
        domain=lang.connectives,
        codomain=lang.connectives,
        atom_template=rng.choice(atom_pool),
        neg_template=rng.choice(neg_pool) if lang.has(NEG) else None,
        bin_templates={c: rng.choice(bin_pool) for c in lang.binary_connectives},
    )


# --- JSON schema -----------------------------------------------------------------


def exercise_to_jsonable(spec: ExerciseSpec) -> dict:
    functions = []
    for fn in spec.functions:
        if isinstance(fn, CountingFunctionDef):
            entry: dict = {
                "name": fn.name,
                "kind": "counting",
                "atom": fn.atom_default,
                "bin": {conn: list(case) for conn, case in fn.bin_cases.items()},
            }
            if fn.neg_case is not None:
                entry["neg"] = list(fn.neg_case)
            if fn.atom_cases:
                entry["atomCases"] = dict(fn.atom_cases)
        else:
            entry = {
                "name": fn.name,
                "kind": "transform",
                "domain": list(fn.domain),
                "codomain": list(fn.codomain),
                "atom": print_formula(fn.atom_template),
                "bin": {conn: print_formula(t) for conn, t in fn.bin_templates.items()},
            }
            if fn.neg_template is not None:
                entry["neg"] = print_formula(fn.neg_template)
        functions.append(entry)
    for val in spec.valuations:
        functions.append(
            {
                "name": val.name,
                "kind": "valuation",
                "properties": [
                    {"left": p.left, "comp": p.comp, "right": p.right} for p in val.properties
                ],
            }
        )
    from .terms import print_expr

    return {
        "id": spec.id,
        "description": spec.description,
        "language": {"atoms": list(spec.lang.atoms), "connectives": list(spec.lang.connectives)},
        "functions": functions,
        "theorem": {
            "lhs": print_expr(spec.theorem.lhs),
            "comp": spec.theorem.comp,
            "rhs": print_expr(spec.theorem.rhs),
        },
    }


def exercise_from_jsonable(data: Mapping) -> ExerciseSpec:
    from .syntax import parse_template
    from .terms import parse_statement

    lang = LanguageSpec(
        atoms=tuple(data["language"]["atoms"]),
        connectives=tuple(data["language"]["connectives"]),
    )
    functions: list[Union[CountingFunctionDef, TransformFunctionDef]] = []
    valuations: list[ValuationDef] = []
    for entry in data["functions"]:
        kind = entry["kind"]
        if kind == "counting":
            functions.append(
                CountingFunctionDef(
                    name=entry["name"],
                    atom_default=int(entry["atom"]),
                    neg_case=tuple(entry["neg"]) if "neg" in entry else None,
                    bin_cases={conn: tuple(case) for conn, case in entry.get("bin", {}).items()},
                    atom_cases={a: int(v) for a, v in entry.get("atomCases", {}).items()},
                )
            )
        elif kind == "transform":
            functions.append(
                TransformFunctionDef(
                    name=entry["name"],
                    domain=tuple(entry["domain"]),
                    codomain=tuple(entry["codomain"]),
                    atom_template=parse_template(entry["atom"]),
                    neg_template=parse_template(entry["neg"]) if "neg" in entry else None,
                    bin_templates={conn: parse_template(t) for conn, t in entry.get("bin", {}).items()},
                )
            )
        elif kind == "valuation":
            valuations.append(
                ValuationDef(
                    name=entry["name"],
                    properties=tuple(
                        ValuationProperty(p["left"], p["comp"], p["right"])
                        for p in entry.get("properties", [])
                    ),
                )
            )
        else:
            raise ValueError(f"unknown function kind {kind!r}")
    kinds = {f.name: f.kind for f in functions}
    kinds.update({v.name: "valuation" for v in valuations})
    theorem_text = f"{data['theorem']['lhs']} {data['theorem']['comp']} {data['theorem']['rhs']}"
    theorem = parse_statement(theorem_text, kinds)
    return ExerciseSpec(
        id=data["id"],
        description=data.get("description", ""),
        lang=lang,
        functions=tuple(functions),
        valuations=tuple(valuations),
        theorem=theorem,
    )
