"""
Fuzzy Core

Generic Mamdani inference engine over discretized universes.

Pipeline for one output class:
    crisp inputs → fuzzify → rule strengths (weight × min over clauses)
      → clip consequent terms at their strength (min implication)
      → aggregate clipped sets (pointwise max) → centroid → Φ

The operator suite is fixed: AND = min, OR = max, implication = min,
aggregation = max, defuzzifier = centroid.

Input:  FuzzySystem + crisp values keyed by variable name
Output: per-class Φ in [0, 1] with a fired-rule trace

Pure functions over frozen dataclasses. Deterministic. No network calls.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)

OUTPUT_RESOLUTION = 1001
INPUT_RESOLUTION = 1001
RANGE_TOLERANCE = 1e-9
# Φ values closer than this count as tied
PHI_TIE_TOLERANCE = 1e-12

# kind → number of breakpoints
MF_KINDS = {"triangle": 3, "trapezoid": 4}


class FuzzyConfigError(ValueError):
    """A rule or lookup references a variable, term or class that does not exist."""


class EmptyFuzzySetError(ValueError):
    """Centroid requested for a set whose samples are all zero."""


class InputOutOfRangeError(ValueError):
    """Crisp input lies outside its universe by more than RANGE_TOLERANCE."""


class FuzzySet(Protocol):
    def evaluate(self, x): ...


# ─────────────────────────────────────────
# Types
# ─────────────────────────────────────────

@dataclass(frozen=True)
class Universe:
    lo: float
    hi: float
    resolution: int = INPUT_RESOLUTION

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.resolution - 1)

    def samples(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.resolution)


@dataclass(frozen=True)
class MembershipFunction:
    """Piecewise-linear triangle (a, b, c) or trapezoid (a, b, c, d)."""

    kind: str
    breakpoints: tuple[float, ...]

    @classmethod
    def triangle(cls, a, b, c) -> "MembershipFunction":
        return cls("triangle", (float(a), float(b), float(c)))

    @classmethod
    def trapezoid(cls, a, b, c, d) -> "MembershipFunction":
        return cls("trapezoid", (float(a), float(b), float(c), float(d)))

    @property
    def corners(self) -> tuple[float, float, float, float]:
        bp = self.breakpoints
        if self.kind == "triangle":
            return bp[0], bp[1], bp[1], bp[2]
        return bp[0], bp[1], bp[2], bp[3]

    @property
    def support(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]

    def evaluate(self, x):
        a, b, c, d = self.corners
        x = np.asarray(x, dtype=float)
        rise = (x - a) / (b - a) if b > a else np.where(x >= a, 1.0, 0.0)
        fall = (d - x) / (d - c) if d > c else np.where(x <= d, 1.0, 0.0)
        mu = np.clip(np.minimum(rise, fall), 0.0, 1.0)
        return np.where((x < a) | (x > d), 0.0, mu)


@dataclass(frozen=True)
class Term:
    label: str
    mf: MembershipFunction


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: Universe
    terms: tuple[Term, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)

    def term(self, label: str) -> MembershipFunction:
        for t in self.terms:
            if t.label == label:
                return t.mf
        raise FuzzyConfigError(f"variable '{self.name}' has no term '{label}'")


@dataclass(frozen=True)
class Clause:
    variable: str
    term: str


@dataclass(frozen=True)
class Rule:
    id: str
    antecedent: tuple[Clause, ...]
    consequent_class: str
    consequent_term: str
    weight: float = 1.0

    def describe(self) -> str:
        conditions = " AND ".join(f"{c.variable} is {c.term}" for c in self.antecedent)
        text = f"IF {conditions} THEN {self.consequent_class} is {self.consequent_term}"
        if self.weight != 1.0:
            text += f" (weight {self.weight:g})"
        return text


@dataclass(frozen=True)
class OperatorSuite:
    and_operator: str = "min"
    or_operator: str = "max"
    implication: str = "min"
    aggregation: str = "max"
    defuzzifier: str = "centroid"


MAMDANI = OperatorSuite()


@dataclass(frozen=True)
class FuzzySystem:
    inputs: tuple[LinguisticVariable, ...]
    output_universe: Universe
    output_terms: tuple[Term, ...]
    classes: tuple[str, ...]
    rules: tuple[Rule, ...]
    operators: OperatorSuite = MAMDANI

    def variable(self, name: str) -> LinguisticVariable:
        for var in self.inputs:
            if var.name == name:
                return var
        raise FuzzyConfigError(f"unknown input variable '{name}'")

    def output_term(self, label: str) -> MembershipFunction:
        for t in self.output_terms:
            if t.label == label:
                return t.mf
        raise FuzzyConfigError(f"unknown output term '{label}'")

    def rules_for(self, class_label: str) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.consequent_class == class_label)


@dataclass(frozen=True)
class ClippedSet:
    """Consequent term cut at the firing strength: min(μ_base(x), height)."""

    base: MembershipFunction
    height: float

    def evaluate(self, x):
        return np.minimum(self.base.evaluate(x), self.height)


@dataclass(frozen=True)
class AggregateSet:
    parts: tuple[FuzzySet, ...]

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if not self.parts:
            return np.zeros_like(x)
        return np.maximum.reduce([np.asarray(p.evaluate(x), dtype=float) for p in self.parts])


@dataclass(frozen=True)
class FiredRule:
    rule_id: str
    strength: float


@dataclass(frozen=True)
class ClassInference:
    class_label: str
    phi: float
    trace: tuple[FiredRule, ...]

    @property
    def height(self) -> float:
        """Peak of the aggregate: the strongest fired rule, 0 when none fired."""
        return max((f.strength for f in self.trace), default=0.0)


# ─────────────────────────────────────────
# Operations
# ─────────────────────────────────────────

def mf_eval(mf: MembershipFunction, x: float) -> float:
    """Membership degree of a crisp value. Total: 0 outside the support."""
    return float(mf.evaluate(x))


def clamp_to_universe(var: LinguisticVariable, x: float) -> tuple[float, str | None]:
    """Clamp x into var's universe.

    Returns:
        (clamped value, warning text or None when x was already inside).
    """
    x = float(x)
    if not math.isfinite(x):
        raise InputOutOfRangeError(f"{var.name}={x} is not a finite number")
    lo, hi = var.universe.lo, var.universe.hi
    clamped = min(max(x, lo), hi)
    if abs(clamped - x) <= RANGE_TOLERANCE:
        return clamped, None
    warning = f"{var.name}={x:g} outside [{lo:g}, {hi:g}]; clamped to {clamped:g}"
    logger.info(warning)
    return clamped, warning


def fuzzify(var: LinguisticVariable, x: float) -> dict[str, float]:
    """Degree of x in every term of var, in term order.

    Raises:
        InputOutOfRangeError: x is outside the universe by more than the
            tolerance (callers clamp first via clamp_to_universe).
    """
    x = float(x)
    lo, hi = var.universe.lo, var.universe.hi
    if not math.isfinite(x) or x < lo - RANGE_TOLERANCE or x > hi + RANGE_TOLERANCE:
        raise InputOutOfRangeError(f"{var.name}={x} outside [{lo:g}, {hi:g}]")
    x = min(max(x, lo), hi)
    return {t.label: mf_eval(t.mf, x) for t in var.terms}


def fuzzify_all(system: FuzzySystem, crisp: Mapping[str, float]) -> dict[str, dict[str, float]]:
    degrees = {}
    for var in system.inputs:
        if var.name not in crisp:
            raise FuzzyConfigError(f"missing crisp input for variable '{var.name}'")
        degrees[var.name] = fuzzify(var, crisp[var.name])
    return degrees


def rule_strength(rule: Rule, fuzzified: Mapping[str, Mapping[str, float]]) -> float:
    """weight × min over the antecedent's clause degrees."""
    degrees = []
    for clause in rule.antecedent:
        terms = fuzzified.get(clause.variable)
        if terms is None:
            raise FuzzyConfigError(f"rule {rule.id}: unknown variable '{clause.variable}'")
        if clause.term not in terms:
            raise FuzzyConfigError(
                f"rule {rule.id}: variable '{clause.variable}' has no term '{clause.term}'"
            )
        degrees.append(terms[clause.term])
    if not degrees:
        raise FuzzyConfigError(f"rule {rule.id}: empty antecedent")
    return rule.weight * min(degrees)


def defuzzify_centroid(fuzzy_set: FuzzySet, universe: Universe) -> float:
    """Σ xᵢ·μ(xᵢ) / Σ μ(xᵢ) over the universe's uniform samples.

    Raises:
        EmptyFuzzySetError: every sample has zero membership.
    """
    xs = universe.samples()
    mu = np.asarray(fuzzy_set.evaluate(xs), dtype=float)
    total = float(mu.sum())
    if total <= 0.0:
        raise EmptyFuzzySetError("centroid of an empty fuzzy set is undefined")
    return float(np.dot(xs, mu) / total)


def infer_class(system: FuzzySystem, crisp: Mapping[str, float], class_label: str,
                *, fuzzified: Mapping[str, Mapping[str, float]] | None = None) -> ClassInference:
    """Φ for one class: centroid of the max-aggregate of its clipped consequents.

    Φ is 0 when no rule concluding the class fires.
    """
    if class_label not in system.classes:
        raise FuzzyConfigError(f"unknown class '{class_label}'")
    if fuzzified is None:
        fuzzified = fuzzify_all(system, crisp)

    fired = []
    clipped = []
    for rule in system.rules_for(class_label):
        strength = rule_strength(rule, fuzzified)
        if strength > 0.0:
            fired.append(FiredRule(rule.id, strength))
            clipped.append(ClippedSet(system.output_term(rule.consequent_term), strength))

    if not clipped:
        return ClassInference(class_label, 0.0, ())
    phi = defuzzify_centroid(AggregateSet(tuple(clipped)), system.output_universe)
    return ClassInference(class_label, phi, tuple(fired))


def infer(system: FuzzySystem, crisp: Mapping[str, float]) -> dict[str, ClassInference]:
    """infer_class for every class, sharing one fuzzification."""
    fuzzified = fuzzify_all(system, crisp)
    return {
        label: infer_class(system, crisp, label, fuzzified=fuzzified)
        for label in system.classes
    }


def select_class(phi: Mapping[str, float], order: Sequence[str],
                 heights: Mapping[str, float] | None = None) -> str:
    """Argmax of phi.

    Φ values within PHI_TIE_TOLERANCE are tied. Tied labels are narrowed to
    the highest aggregate peak when heights are given, then the label that
    comes first in order wins. Below the first nonzero sample of a ramp the
    centroid no longer depends on the clip height, so the peak is what still
    separates two weakly fired classes.
    """
    top = max(phi[label] for label in order)
    tied = [label for label in order if top - phi[label] <= PHI_TIE_TOLERANCE]
    if heights is not None and len(tied) > 1:
        peak = max(heights[label] for label in tied)
        tied = [label for label in tied if heights[label] == peak]
    return tied[0]


# --- Self-check ---
if __name__ == "__main__":
    print("=== Fuzzy Core Self-Check ===\n")

    print("Test 1: Membership evaluation")
    assert mf_eval(MembershipFunction.trapezoid(0, 0, 15, 45), 0) == 1.0
    assert mf_eval(MembershipFunction.triangle(0.2, 0.4, 0.55), 0.9) == 0.0
    assert abs(mf_eval(MembershipFunction.triangle(0.2, 0.4, 0.55), 0.3) - 0.5) < 1e-12
    print("  [OK]")

    print("\nTest 2: Rule strength")
    rule = Rule("R1", (Clause("a", "x"), Clause("b", "y")), "c", "IN", weight=0.5)
    assert rule_strength(rule, {"a": {"x": 0.6}, "b": {"y": 0.9}}) == 0.3
    print(f"  {rule.describe()}")
    print("  [OK]")

    print("\nTest 3: Centroid")
    unit = Universe(0.0, 1.0, OUTPUT_RESOLUTION)
    c = defuzzify_centroid(MembershipFunction.triangle(0.4, 0.5, 0.6), unit)
    assert abs(c - 0.5) < 1e-9
    right = defuzzify_centroid(MembershipFunction.triangle(0, 0, 1), unit)
    assert abs(right - 1 / 3) < 1e-3
    print(f"  symmetric: {c:.6f}, right triangle: {right:.6f}")
    print("  [OK]")

    print("\nTest 4: Empty aggregate gives Φ = 0")
    var = LinguisticVariable("a", Universe(0, 1), (
        Term("lo", MembershipFunction.trapezoid(0, 0, 0.4, 0.6)),
        Term("hi", MembershipFunction.trapezoid(0.4, 0.6, 1, 1)),
    ))
    system = FuzzySystem(
        inputs=(var,),
        output_universe=unit,
        output_terms=(Term("IN", MembershipFunction.trapezoid(0.75, 0.9, 1, 1)),),
        classes=("c",),
        rules=(Rule("R1", (Clause("a", "hi"),), "c", "IN"),),
    )
    assert infer_class(system, {"a": 0.1}, "c").phi == 0.0
    assert infer_class(system, {"a": 0.9}, "c").trace == (FiredRule("R1", 1.0),)
    print("  [OK]")

    print("\n=== All fuzzy_core checks passed ===")
