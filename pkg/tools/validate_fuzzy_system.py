"""
Validate Fuzzy System

Runs structural validation rules against a FuzzySystem.

Rule categories:
  UV — Universes (2 rules per universe)
  MF — Membership Functions (3 rules per term)
  LV — Linguistic Variables (4 rules)
  RL — Rules (7 rules)
  CL — Classes (3 rules)
  OP — Operators (1 rule)

Input:  system (FuzzySystem)
Output: list of Diagnostic — empty means the system is accepted

Locations use knowledge-base document paths (e.g. "inputs.0.terms.2",
"rules.4.antecedent.1") so file-level tools can point at the offending entry.

Deterministic. No network calls.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from tools.fuzzy_core import (
    MAMDANI,
    MF_KINDS,
    FuzzyConfigError,
    FuzzySystem,
    LinguisticVariable,
    Term,
    Universe,
)


@dataclass(frozen=True)
class Diagnostic:
    rule_id: str
    message: str
    location: str = ""
    severity: str = "error"

    def to_dict(self) -> dict:
        return asdict(self)


class InvalidSystemError(FuzzyConfigError):
    """System failed validation; .diagnostics holds every violation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        summary = "; ".join(f"[{d.rule_id}] {d.message}" for d in self.diagnostics[:3])
        more = len(self.diagnostics) - 3
        if more > 0:
            summary += f"; … {more} more"
        super().__init__(f"fuzzy system has {len(self.diagnostics)} violation(s): {summary}")


def _run_checks(system):
    diagnostics = []
    checks_run = 0

    def _check(rule_id, condition, message, location=""):
        nonlocal checks_run
        checks_run += 1
        if not condition:
            diagnostics.append(Diagnostic(rule_id, message, location))
        return bool(condition)

    def _universe(universe: Universe, location):
        _check("UV-001", universe.lo < universe.hi,
               f"universe lo ({universe.lo:g}) must be below hi ({universe.hi:g})",
               location)
        _check("UV-002", isinstance(universe.resolution, int) and universe.resolution >= 3
               and universe.resolution % 2 == 1,
               f"universe resolution must be an odd integer ≥ 3, got {universe.resolution}",
               location)

    def _terms(owner, universe: Universe, terms: tuple[Term, ...], location):
        all_shapes_ok = True
        _check("LV-001", len(terms) >= 2,
               f"{owner} needs at least 2 terms, has {len(terms)}", location)
        labels = [t.label for t in terms]
        duplicates = sorted({lb for lb in labels if labels.count(lb) > 1})
        _check("LV-002", not duplicates,
               f"{owner} has duplicate term labels {duplicates}", location)
        for j, term in enumerate(terms):
            where = f"{location}.terms.{j}"
            mf = term.mf
            count_ok = _check(
                "MF-001", MF_KINDS.get(mf.kind) == len(mf.breakpoints),
                f"{owner} term '{term.label}': {mf.kind} needs "
                f"{MF_KINDS.get(mf.kind, '?')} breakpoints, got {len(mf.breakpoints)}",
                where,
            )
            bp = mf.breakpoints
            order_ok = _check(
                "MF-002", all(math.isfinite(v) for v in bp)
                and all(b >= a for a, b in zip(bp, bp[1:])),
                f"{owner} term '{term.label}': breakpoints must be finite and "
                f"non-decreasing, got {list(bp)}",
                where,
            )
            range_ok = _check(
                "MF-003", all(universe.lo <= v <= universe.hi for v in bp),
                f"{owner} term '{term.label}': breakpoints {list(bp)} leave "
                f"[{universe.lo:g}, {universe.hi:g}]",
                where,
            )
            all_shapes_ok = all_shapes_ok and count_ok and order_ok and range_ok
        if all_shapes_ok and terms and universe.lo < universe.hi:
            for start, end in coverage_gaps(universe, terms):
                _check("LV-003", False,
                       f"{owner} has no term covering [{start:g}, {end:g}]", location)

    # === UV / MF / LV — inputs ===
    names = [v.name for v in system.inputs]
    duplicate_names = sorted({n for n in names if names.count(n) > 1})
    _check("LV-004", bool(names) and not duplicate_names,
           "inputs must be non-empty with unique names"
           + (f"; duplicates {duplicate_names}" if duplicate_names else ""),
           "inputs")
    for i, var in enumerate(system.inputs):
        _universe(var.universe, f"inputs.{i}")
        _terms(f"variable '{var.name}'", var.universe, var.terms, f"inputs.{i}")

    # === UV / MF / LV — output ===
    _universe(system.output_universe, "output")
    _terms("output", system.output_universe, system.output_terms, "output")

    # === CL — Classes ===
    classes = list(system.classes)
    _check("CL-001", len(classes) > 0, "at least one class is required", "classes")
    duplicate_classes = sorted({c for c in classes if classes.count(c) > 1})
    _check("CL-002", not duplicate_classes,
           f"duplicate class labels {duplicate_classes}", "classes")
    concluded = {r.consequent_class for r in system.rules}
    for k, label in enumerate(classes):
        _check("CL-003", label in concluded,
               f"class '{label}' has no rule concluding it", f"classes.{k}")

    # === RL — Rules ===
    variables: dict[str, LinguisticVariable] = {v.name: v for v in system.inputs}
    output_labels = {t.label for t in system.output_terms}
    ids = [r.id for r in system.rules]
    duplicate_ids = sorted({i for i in ids if ids.count(i) > 1})
    _check("RL-007", not duplicate_ids, f"duplicate rule ids {duplicate_ids}", "rules")
    for n, rule in enumerate(system.rules):
        where = f"rules.{n}"
        _check("RL-001", len(rule.antecedent) > 0,
               f"rule {rule.id} has an empty antecedent", where)
        for m, clause in enumerate(rule.antecedent):
            var = variables.get(clause.variable)
            if _check("RL-002", var is not None,
                      f"rule {rule.id} references unknown variable '{clause.variable}'",
                      f"{where}.antecedent.{m}"):
                _check("RL-003", clause.term in var.labels,
                       f"rule {rule.id} references term '{clause.term}' absent from "
                       f"variable '{clause.variable}'",
                       f"{where}.antecedent.{m}")
        _check("RL-004", rule.consequent_class in classes,
               f"rule {rule.id} concludes unknown class '{rule.consequent_class}'",
               f"{where}.consequent")
        _check("RL-005", rule.consequent_term in output_labels,
               f"rule {rule.id} concludes unknown output term '{rule.consequent_term}'",
               f"{where}.consequent")
        _check("RL-006", 0.0 < rule.weight <= 1.0,
               f"rule {rule.id} weight {rule.weight:g} must lie in (0, 1]", where)

    # === OP — Operators ===
    _check("OP-001", system.operators == MAMDANI,
           "operator suite must be AND=min, implication=min, aggregation=max, "
           "defuzzifier=centroid", "operators")

    return diagnostics, checks_run


def coverage_gaps(universe: Universe, terms) -> list[tuple[float, float]]:
    """Intervals of the universe where every term has zero membership.

    A term is positive on the open interval between its first and last
    breakpoints, plus an end point when that end is a shoulder (a == b or
    c == d). Single-point gaps come back as (x, x).
    """
    intervals = []
    for term in terms:
        a, b, c, d = term.mf.corners
        intervals.append((a, d, a == b, c == d))
    intervals.sort(key=lambda iv: (iv[0], not iv[2]))

    gaps = []
    reach, reach_closed = universe.lo, False
    for start, end, start_closed, end_closed in intervals:
        if start > reach or (start == reach and not start_closed and not reach_closed):
            gaps.append((reach, min(start, universe.hi)))
        if end > reach:
            reach, reach_closed = end, end_closed
        elif end == reach:
            reach_closed = reach_closed or end_closed
        if reach > universe.hi:
            break
    if reach < universe.hi or (reach == universe.hi and not reach_closed):
        gaps.append((reach, universe.hi))
    return [(s, e) for s, e in gaps if s <= universe.hi]


def validate_system(system: FuzzySystem) -> list[Diagnostic]:
    """Every structural violation of system; an empty list means accepted."""
    diagnostics, _ = _run_checks(system)
    return diagnostics


def validation_report(system: FuzzySystem) -> dict:
    """validate_system wrapped in a report dict.

    Returns:
        dict with valid, errors, warnings, checks_run, checks_passed, checks_failed.
    """
    diagnostics, checks_run = _run_checks(system)
    errors = [d.to_dict() for d in diagnostics if d.severity == "error"]
    warnings = [d.to_dict() for d in diagnostics if d.severity == "warning"]
    return {
        "valid": len(errors) == 0,
        "errors": errors,
        "warnings": warnings,
        "checks_run": checks_run,
        "checks_passed": checks_run - len(diagnostics),
        "checks_failed": len(diagnostics),
    }


def require_valid(system: FuzzySystem) -> FuzzySystem:
    """Return system unchanged, or raise InvalidSystemError with its diagnostics."""
    diagnostics = validate_system(system)
    if diagnostics:
        raise InvalidSystemError(diagnostics)
    return system


# --- Self-check ---
if __name__ == "__main__":
    from dataclasses import replace

    from tools.fuzzy_core import Clause, MembershipFunction, Rule
    from tools.knowledge_base import build_default_kb

    print("=== Validate Fuzzy System Self-Check ===\n")

    print("Test 1: Shipped KB passes all checks")
    kb = build_default_kb()
    report = validation_report(kb)
    assert report["valid"] is True, report["errors"]
    assert report["checks_failed"] == 0
    print(f"  Checks: {report['checks_passed']}/{report['checks_run']}")
    print("  [OK]")

    print("\nTest 2: Coverage gap is named with its interval")
    angle = kb.inputs[0]
    gapped = replace(angle, terms=(
        Term("PS", MembershipFunction.trapezoid(0, 0, 15, 46)),
        Term("P", MembershipFunction.trapezoid(54, 60, 70, 87)),
        Term("PL", MembershipFunction.trapezoid(75, 87, 90, 90)),
    ))
    diags = validate_system(replace(kb, inputs=(gapped,) + kb.inputs[1:]))
    gaps = [d for d in diags if d.rule_id == "LV-003"]
    assert len(gaps) == 1 and "[46, 54]" in gaps[0].message, diags
    print(f"  {gaps[0].message}")
    print("  [OK]")

    print("\nTest 3: Dangling term reference")
    bad_rule = Rule("RX", (Clause("angle", "XL"),), "ST", "IN")
    diags = validate_system(replace(kb, rules=kb.rules + (bad_rule,)))
    assert [d.rule_id for d in diags] == ["RL-003"], diags
    print(f"  {diags[0].location}: {diags[0].message}")
    print("  [OK]")

    print("\n=== All validate_fuzzy_system checks passed ===")
