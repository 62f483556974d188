"""Built-in exercise catalog."""

from __future__ import annotations

from .definitions import (
    CountingFunctionDef,
    TransformFunctionDef,
    ValuationDef,
    ValuationProperty,
)
from .exercises import ExerciseSpec
from .syntax import AND, IMP, NEG, OR, Bin, LanguageSpec, Neg, SubstVar
from .terms import parse_statement

_S = SubstVar("s")
_S1 = SubstVar("s1")
_S2 = SubstVar("s2")


def _prop_bin() -> ExerciseSpec:
    lang = LanguageSpec(("p", "q", "r"), (NEG, AND, IMP))
    prop = CountingFunctionDef(
        name="prop",
        atom_default=1,
        neg_case=(0, 1),
        bin_cases={AND: (0, 1, 1), IMP: (0, 1, 1)},
    )
    bin_count = CountingFunctionDef(
        name="bin",
        atom_default=0,
        neg_case=(0, 1),
        bin_cases={AND: (1, 1, 1), IMP: (1, 1, 1)},
    )
    kinds = {"prop": "counting", "bin": "counting"}
    return ExerciseSpec(
        id="prop-bin",
        description=(
            "The language L has atoms p, q, r, ... and connectives ~, /\\ and ->. "
            "prop counts the occurrences of atoms in a formula and bin counts its "
            "binary connectives. Prove that prop(phi) = bin(phi) + 1 for every "
            "formula phi of L."
        ),
        lang=lang,
        functions=(prop, bin_count),
        theorem=parse_statement("prop(phi) = bin(phi) + 1", kinds),
    )


def _vala_valb() -> ExerciseSpec:
    lang = LanguageSpec(("p", "q", "r"), (AND, OR))
    vala = ValuationDef("ValA", (ValuationProperty("ValA", "<=", "ValB"),))
    valb = ValuationDef("ValB")
    kinds = {"ValA": "valuation", "ValB": "valuation"}
    return ExerciseSpec(
        id="vala-valb",
        description=(
            "The language L has connectives /\\ and \\/. ValA and ValB are "
            "valuations with ValA(p) <= ValB(p) for every atom p. Prove that "
            "ValA(phi) <= ValB(phi) for every formula phi of L."
        ),
        lang=lang,
        functions=(),
        valuations=(vala, valb),
        theorem=parse_statement("ValA(phi) <= ValB(phi)", kinds),
    )


def _star_length() -> ExerciseSpec:
    lang = LanguageSpec(("p", "q", "r"), (AND, OR))
    star = TransformFunctionDef(
        name="star",
        domain=(AND, OR),
        codomain=(NEG, AND, OR),
        atom_template=Neg(_S),
        bin_templates={AND: Bin(OR, _S1, _S2), OR: Bin(AND, _S1, _S2)},
    )
    length = CountingFunctionDef(
        name="length",
        atom_default=1,
        neg_case=(1, 1),
        bin_cases={AND: (1, 1, 1), OR: (1, 1, 1)},
    )
    kinds = {"star": "transform", "length": "counting"}
    return ExerciseSpec(
        id="star-length",
        description=(
            "The language L has connectives /\\ and \\/. star replaces every atom "
            "by its negation, every conjunction by a disjunction and every "
            "disjunction by a conjunction. length is the symbol count of a "
            "formula. Prove that length(star(phi)) <= 2 * length(phi) for every "
            "formula phi of L."
        ),
        lang=lang,
        functions=(star, length),
        theorem=parse_statement("length(star(phi)) <= 2 * length(phi)", kinds),
    )


def _compose_commute() -> ExerciseSpec:
    lang = LanguageSpec(("p", "q", "r"), (NEG, AND, OR, IMP))
    f = TransformFunctionDef(
        name="f",
        domain=(NEG, AND, OR, IMP),
        codomain=(NEG, AND, OR, IMP),
        atom_template=_S,
        neg_template=Neg(_S),
        bin_templates={
            AND: Neg(Bin(OR, Neg(_S1), Neg(_S2))),
            OR: Bin(OR, _S1, _S2),
            IMP: Bin(IMP, _S1, _S2),
        },
    )
    g = TransformFunctionDef(
        name="g",
        domain=(NEG, AND, OR, IMP),
        codomain=(NEG, AND, OR, IMP),
        atom_template=_S,
        neg_template=Neg(_S),
        bin_templates={
            AND: Bin(AND, _S1, _S2),
            OR: Bin(OR, _S1, _S2),
            IMP: Bin(OR, Neg(_S1), _S2),
        },
    )
    kinds = {"f": "transform", "g": "transform"}
    return ExerciseSpec(
        id="compose-commute",
        description=(
            "The language L has connectives ~, /\\, \\/ and ->. f replaces every "
            "conjunction x /\\ y by ~(~x \\/ ~y); g replaces every implication "
            "x -> y by ~x \\/ y. Prove that f(g(phi)) = g(f(phi)), where = is "
            "syntactic equality, for every formula phi of L."
        ),
        lang=lang,
        functions=(f, g),
        theorem=parse_statement("f(g(phi)) = g(f(phi))", kinds),
    )


def _len_star() -> ExerciseSpec:
    lang = LanguageSpec(("p", "q", "r"), (NEG, AND, OR, IMP))
    star = TransformFunctionDef(
        name="star",
        domain=(NEG, AND, OR, IMP),
        codomain=(NEG, AND, OR, IMP),
        atom_template=_S,
        neg_template=Neg(_S),
        bin_templates={
            AND: Neg(Bin(OR, Neg(_S1), Neg(_S2))),
            OR: Bin(OR, _S1, _S2),
            IMP: Bin(IMP, _S1, _S2),
        },
    )
    length = CountingFunctionDef(
        name="len",
        atom_default=1,
        neg_case=(1, 1),
        bin_cases={AND: (1, 1, 1), OR: (1, 1, 1), IMP: (1, 1, 1)},
    )
    kinds = {"star": "transform", "len": "counting"}
    return ExerciseSpec(
        id="len-star",
        description=(
            "The language L has connectives ~, /\\, \\/ and ->. star replaces "
            "every conjunction x /\\ y by the equivalent ~(~x \\/ ~y); len is the "
            "symbol count of a formula. Prove that len(star(phi)) <= 3 * len(phi) - 2 "
            "for every formula phi of L."
        ),
        lang=lang,
        functions=(star, length),
        theorem=parse_statement("len(star(phi)) <= 3 * len(phi) - 2", kinds),
    )


def catalog() -> dict[str, ExerciseSpec]:
    """The built-in exercises, keyed by id, in presentation order."""
    specs = (_prop_bin(), _vala_valb(), _star_length(), _compose_commute(), _len_star())
    return {spec.id: spec for spec in specs}


def get_exercise(exercise_id: str) -> ExerciseSpec:
    specs = catalog()
    try:
        return specs[exercise_id]
    except KeyError:
        raise KeyError(f"unknown exercise '{exercise_id}'") from None
