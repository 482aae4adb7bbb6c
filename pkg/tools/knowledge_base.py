"""
Knowledge Base

Oil-water flow-pattern domain layer on top of fuzzy_core: the three input
variables (angle, flow, watercut), the AWAY…IN output family, the four
flow-pattern classes and the 20-rule base, plus classify().

Classes and codes:
    W/O       1   water-in-oil emulsion
    ST        2   separated flow (smooth stratified + stratified with mixing)
    DO/W&W    3   dispersion of oil in water over a free water layer
    DW/O&O/W  4   coexisting water-in-oil and oil-in-water dispersions

Every shipped rule concludes "<class> is IN". Breakpoints and rule weights
are calibration values centred on the experimental design points; the
document form of this KB lives in data/default_kb.json.

Input:  OperatingPoint (angle °, flow m³/d, watercut fraction)
Output: ClassificationResult (Φ per class, predicted pattern, traces)

Deterministic. No network calls.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from tools.fuzzy_core import (
    OUTPUT_RESOLUTION,
    Clause,
    FiredRule,
    FuzzySystem,
    LinguisticVariable,
    MembershipFunction,
    Rule,
    Term,
    Universe,
    clamp_to_universe,
    fuzzify,
    infer_class,
    select_class,
)
from tools.validate_fuzzy_system import require_valid

logger = logging.getLogger(__name__)

ANGLE = "angle"
FLOW = "flow"
WATERCUT = "watercut"

ANGLE_RANGE = (0.0, 90.0)
FLOW_RANGE = (100.0, 600.0)
WATERCUT_RANGE = (0.0, 1.0)

CONSEQUENT_TERM = "IN"


class FlowPattern(Enum):
    """Flow-pattern classes in tie-break order."""

    WO = ("W/O", 1)
    ST = ("ST", 2)
    DOW = ("DO/W&W", 3)
    DWO = ("DW/O&O/W", 4)

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def code(self) -> int:
        return self.value[1]

    @classmethod
    def from_label(cls, label: str) -> "FlowPattern":
        """Parse a class label; surrounding and inner whitespace is ignored."""
        key = re.sub(r"\s+", "", str(label)).upper()
        for pattern in cls:
            if pattern.label.upper() == key:
                return pattern
        raise ValueError(f"unknown flow pattern '{label}'")

    @classmethod
    def from_code(cls, code: int) -> "FlowPattern":
        for pattern in cls:
            if pattern.code == code:
                return pattern
        raise ValueError(f"unknown flow pattern code {code}")


CLASS_ORDER = tuple(p.label for p in FlowPattern)


@dataclass(frozen=True)
class OperatingPoint:
    angle: float
    flow: float
    watercut: float

    def as_inputs(self) -> dict[str, float]:
        return {ANGLE: self.angle, FLOW: self.flow, WATERCUT: self.watercut}


@dataclass(frozen=True)
class ClassificationResult:
    point: OperatingPoint
    phi: Mapping[FlowPattern, float]
    predicted: FlowPattern
    trace: Mapping[FlowPattern, tuple[FiredRule, ...]]
    degrees: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "inputs": {ANGLE: self.point.angle, FLOW: self.point.flow,
                       WATERCUT: self.point.watercut},
            "predicted": self.predicted.label,
            "code": self.predicted.code,
            "phi": {p.label: self.phi[p] for p in FlowPattern},
            "trace": {
                p.label: [{"rule_id": f.rule_id, "strength": f.strength} for f in self.trace[p]]
                for p in FlowPattern
            },
            "degrees": {name: dict(terms) for name, terms in self.degrees.items()},
            "warnings": list(self.warnings),
        }


# ─────────────────────────────────────────
# Shipped knowledge base
# ─────────────────────────────────────────

def _tri(label, a, b, c):
    return Term(label, MembershipFunction.triangle(a, b, c))


def _trap(label, a, b, c, d):
    return Term(label, MembershipFunction.trapezoid(a, b, c, d))


def _input_variables() -> tuple[LinguisticVariable, ...]:
    angle = LinguisticVariable(ANGLE, Universe(*ANGLE_RANGE), (
        _trap("PS", 0, 0, 15, 45),
        _trap("P", 30, 45, 70, 87),
        _trap("PL", 75, 87, 90, 90),
    ))
    flow = LinguisticVariable(FLOW, Universe(*FLOW_RANGE), (
        _trap("M", 100, 100, 175, 325),
        _tri("H", 200, 325, 475),
        _trap("VH", 350, 500, 600, 600),
    ))
    watercut = LinguisticVariable(WATERCUT, Universe(*WATERCUT_RANGE), (
        _trap("VL", 0, 0, 0.2, 0.35),
        _tri("L", 0.2, 0.4, 0.55),
        _tri("ML", 0.45, 0.6, 0.75),
        _tri("M", 0.65, 0.8, 0.92),
        _trap("H", 0.8, 0.88, 1, 1),
    ))
    return angle, flow, watercut


def _output_terms() -> tuple[Term, ...]:
    return (
        _trap("AWAY", 0, 0, 0.1, 0.25),
        _tri("FAR", 0.15, 0.3, 0.45),
        _tri("BORDER", 0.35, 0.5, 0.65),
        _tri("CLOSE", 0.55, 0.7, 0.85),
        _trap("IN", 0.75, 0.9, 1, 1),
    )


# (id, angle term, flow term, watercut term, class, weight); None = clause absent
_RULE_TABLE = (
    ("R01", "PS", None, None, FlowPattern.DOW, 0.9),
    ("R02", "PS", "VH", "VL", FlowPattern.WO, 1.0),
    ("R03", "PS", "VH", "L", FlowPattern.WO, 1.0),
    ("R04", "PS", "VH", "ML", FlowPattern.DWO, 1.0),
    ("R05", "PS", "VH", "M", FlowPattern.DWO, 1.0),
    ("R06", "PS", "VH", "H", FlowPattern.DOW, 1.0),
    ("R07", "P", None, None, FlowPattern.WO, 0.9),
    ("R08", "P", "M", None, FlowPattern.DOW, 1.0),
    ("R09", "P", None, "M", FlowPattern.DWO, 0.95),
    ("R10", "P", None, "H", FlowPattern.DWO, 0.95),
    ("R11", "P", "H", "ML", FlowPattern.WO, 1.0),
    ("R12", "PL", "M", None, FlowPattern.ST, 1.0),
    ("R13", "PL", "H", None, FlowPattern.DOW, 0.9),
    ("R14", "PL", "H", "VL", FlowPattern.ST, 1.0),
    ("R15", "PL", "H", "L", FlowPattern.DWO, 1.0),
    ("R16", "PL", "H", "ML", FlowPattern.DWO, 1.0),
    ("R17", "PL", "VH", None, FlowPattern.DWO, 0.9),
    ("R18", "PL", "VH", "VL", FlowPattern.WO, 1.0),
    ("R19", "PL", "VH", "L", FlowPattern.WO, 1.0),
    ("R20", "PL", "VH", "ML", FlowPattern.WO, 1.0),
)


def _rules() -> tuple[Rule, ...]:
    rules = []
    for rule_id, angle, flow, watercut, pattern, weight in _RULE_TABLE:
        clauses = tuple(
            Clause(name, term)
            for name, term in ((ANGLE, angle), (FLOW, flow), (WATERCUT, watercut))
            if term is not None
        )
        rules.append(Rule(rule_id, clauses, pattern.label, CONSEQUENT_TERM, weight))
    return tuple(rules)


def build_default_kb() -> FuzzySystem:
    """The shipped oil-water knowledge base, validated.

    Returns:
        FuzzySystem with 3 + 3 + 5 input terms, 5 output terms, 4 classes
        and 20 rules.
    """
    system = FuzzySystem(
        inputs=_input_variables(),
        output_universe=Universe(0.0, 1.0, OUTPUT_RESOLUTION),
        output_terms=_output_terms(),
        classes=CLASS_ORDER,
        rules=_rules(),
    )
    return require_valid(system)


# ─────────────────────────────────────────
# Classification
# ─────────────────────────────────────────

def classify(system: FuzzySystem, point: OperatingPoint) -> ClassificationResult:
    """Φ for each flow pattern and the argmax, with traces and clamp warnings.

    Out-of-universe inputs are clamped, never rejected. The system's classes
    must be the four flow-pattern labels.
    """
    crisp = {}
    warnings = []
    for name, value in point.as_inputs().items():
        clamped, warning = clamp_to_universe(system.variable(name), value)
        crisp[name] = clamped
        if warning:
            warnings.append(warning)

    degrees = {var.name: fuzzify(var, crisp[var.name]) for var in system.inputs}

    phi = {}
    trace = {}
    heights = {}
    for pattern in FlowPattern:
        result = infer_class(system, crisp, pattern.label, fuzzified=degrees)
        phi[pattern] = result.phi
        trace[pattern] = result.trace
        heights[pattern.label] = result.height

    best = select_class({p.label: v for p, v in phi.items()}, CLASS_ORDER, heights)
    predicted = FlowPattern.from_label(best)
    logger.debug("classify %s -> %s (Φ=%.4f)", point, predicted.label, phi[predicted])

    return ClassificationResult(
        point=OperatingPoint(crisp[ANGLE], crisp[FLOW], crisp[WATERCUT]),
        phi=phi,
        predicted=predicted,
        trace=trace,
        degrees=degrees,
        warnings=tuple(warnings),
    )


# --- Self-check ---
if __name__ == "__main__":
    print("=== Knowledge Base Self-Check ===\n")

    kb = build_default_kb()

    print("Test 1: Term and rule counts")
    assert tuple(len(v.terms) for v in kb.inputs) == (3, 3, 5)
    assert len(kb.output_terms) == 5
    assert len(kb.rules) == 20
    assert all(r.consequent_term == "IN" for r in kb.rules)
    print("  [OK]")

    print("\nTest 2: Worked example (45°, 350 m³/d, 0.5)")
    result = classify(kb, OperatingPoint(45, 350, 0.5))
    assert result.predicted is FlowPattern.WO
    assert result.phi[FlowPattern.WO] >= 0.9
    print(f"  Φ: { {p.label: round(v, 4) for p, v in result.phi.items()} }")
    print("  [OK]")

    print("\nTest 3: Design points")
    cases = [
        ((0, 100, 0.8), FlowPattern.DOW),
        ((85, 600, 0.6), FlowPattern.WO),
        ((60, 300, 0.8), FlowPattern.DWO),
        ((90, 100, 0.8), FlowPattern.ST),
    ]
    for args, expected in cases:
        got = classify(kb, OperatingPoint(*args)).predicted
        assert got is expected, (args, got)
        print(f"  {args} → {got.label}")
    print("  [OK]")

    print("\nTest 4: Clamping")
    clamped = classify(kb, OperatingPoint(200, 350, 0.5))
    assert clamped.point.angle == 90.0
    assert clamped.warnings and "clamped to 90" in clamped.warnings[0]
    print(f"  {clamped.warnings[0]}")
    print("  [OK]")

    print("\n=== All knowledge_base checks passed ===")
