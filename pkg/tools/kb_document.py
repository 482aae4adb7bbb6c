"""
Knowledge Base Document

Converts between the declarative knowledge-base document (JSON) and a
FuzzySystem.

Document shape (format version 1.0.0):
    {
      "version": "1.0.0",
      "description": "...",                         (optional)
      "inputs":  [{"name", "lo", "hi", "resolution", "terms": [{"label", "kind", "breakpoints"}]}],
      "output":  {"lo", "hi", "resolution", "terms": [...]},
      "classes": ["W/O", ...],
      "rules":   [{"id", "antecedent": [{"variable", "term"}],
                   "consequent": {"class", "term"}, "weight"}]
    }

Shape errors (missing keys, wrong kinds, unordered breakpoints) raise
KnowledgeBaseParseError with a dotted location such as
"inputs.0.terms.1.breakpoints". Structural problems a well-formed document
can still have (coverage gaps, dangling references, classes without rules)
come from validate_fuzzy_system.

Input:  dict | JSON text | file path
Output: FuzzySystem

Deterministic. No network calls.
"""

from __future__ import annotations

import json
import logging
import os
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator

from tools.fuzzy_core import (
    INPUT_RESOLUTION,
    MF_KINDS,
    OUTPUT_RESOLUTION,
    Clause,
    FuzzySystem,
    LinguisticVariable,
    MembershipFunction,
    Rule,
    Term,
    Universe,
)
from tools.validate_fuzzy_system import InvalidSystemError, validate_system

logger = logging.getLogger(__name__)

KB_FORMAT_VERSION = "1.0.0"
KB_PATH_ENV = "FLOWFIS_KB_PATH"
DEFAULT_KB_FILE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                               "data", "default_kb.json")


class KnowledgeBaseParseError(ValueError):
    """Document is not a well-formed knowledge base; .location points at the offending entry."""

    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class KnowledgeBaseValidationError(InvalidSystemError):
    """Document parsed but the resulting system has diagnostics."""


# ─────────────────────────────────────────
# Document models
# ─────────────────────────────────────────

class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, populate_by_name=True)


class TermDoc(_Doc):
    label: str
    kind: Literal["triangle", "trapezoid"]
    breakpoints: list[float]

    @field_validator("breakpoints")
    @classmethod
    def _check_breakpoints(cls, value, info: ValidationInfo):
        kind = info.data.get("kind")
        if kind is not None and len(value) != MF_KINDS[kind]:
            raise ValueError(f"{kind} needs {MF_KINDS[kind]} breakpoints, got {len(value)}")
        if any(b < a for a, b in zip(value, value[1:])):
            raise ValueError(f"breakpoints must be non-decreasing, got {value}")
        return value


class VariableDoc(_Doc):
    name: str
    lo: float
    hi: float
    resolution: int = INPUT_RESOLUTION
    terms: list[TermDoc]


class OutputDoc(_Doc):
    lo: float = 0.0
    hi: float = 1.0
    resolution: int = OUTPUT_RESOLUTION
    terms: list[TermDoc]


class ClauseDoc(_Doc):
    variable: str
    term: str


class ConsequentDoc(_Doc):
    class_: str = Field(alias="class")
    term: str


class RuleDoc(_Doc):
    id: str
    antecedent: list[ClauseDoc]
    consequent: ConsequentDoc
    weight: float = 1.0


class KnowledgeBaseDoc(_Doc):
    version: str = KB_FORMAT_VERSION
    description: Optional[str] = None
    inputs: list[VariableDoc]
    output: OutputDoc
    classes: list[str]
    rules: list[RuleDoc]

    @field_validator("version")
    @classmethod
    def _check_version(cls, value):
        if value != KB_FORMAT_VERSION:
            raise ValueError(f"unsupported format version '{value}' (expected {KB_FORMAT_VERSION})")
        return value


# ─────────────────────────────────────────
# Conversion
# ─────────────────────────────────────────

def _term(doc: TermDoc) -> Term:
    return Term(doc.label, MembershipFunction(doc.kind, tuple(float(v) for v in doc.breakpoints)))


def _term_doc(term: Term) -> TermDoc:
    return TermDoc(label=term.label, kind=term.mf.kind, breakpoints=list(term.mf.breakpoints))


def parse_document(source: Union[KnowledgeBaseDoc, dict, str]) -> KnowledgeBaseDoc:
    """Coerce a model, dict or JSON text into a KnowledgeBaseDoc.

    Raises:
        KnowledgeBaseParseError: invalid JSON or a document shape error.
    """
    if isinstance(source, KnowledgeBaseDoc):
        return source
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as e:
            raise KnowledgeBaseParseError(e.msg, f"line {e.lineno}, column {e.colno}") from e
    if not isinstance(source, dict):
        raise KnowledgeBaseParseError("document must be a JSON object")
    try:
        return KnowledgeBaseDoc.model_validate(source)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        message = first["msg"].removeprefix("Value error, ")
        raise KnowledgeBaseParseError(message, location) from e


def parse_kb(source: Union[KnowledgeBaseDoc, dict, str]) -> FuzzySystem:
    """Build the FuzzySystem a document describes, without validating it."""
    doc = parse_document(source)
    inputs = tuple(
        LinguisticVariable(v.name, Universe(v.lo, v.hi, v.resolution),
                           tuple(_term(t) for t in v.terms))
        for v in doc.inputs
    )
    rules = tuple(
        Rule(
            id=r.id,
            antecedent=tuple(Clause(c.variable, c.term) for c in r.antecedent),
            consequent_class=r.consequent.class_,
            consequent_term=r.consequent.term,
            weight=r.weight,
        )
        for r in doc.rules
    )
    return FuzzySystem(
        inputs=inputs,
        output_universe=Universe(doc.output.lo, doc.output.hi, doc.output.resolution),
        output_terms=tuple(_term(t) for t in doc.output.terms),
        classes=tuple(doc.classes),
        rules=rules,
    )


def load_kb(source: Union[KnowledgeBaseDoc, dict, str]) -> FuzzySystem:
    """parse_kb followed by validation.

    Raises:
        KnowledgeBaseParseError: malformed document.
        KnowledgeBaseValidationError: the system has diagnostics.
    """
    system = parse_kb(source)
    diagnostics = validate_system(system)
    if diagnostics:
        logger.warning("knowledge base rejected with %d diagnostic(s)", len(diagnostics))
        raise KnowledgeBaseValidationError(diagnostics)
    return system


def save_kb(system: FuzzySystem, description: Optional[str] = None) -> KnowledgeBaseDoc:
    return KnowledgeBaseDoc(
        version=KB_FORMAT_VERSION,
        description=description,
        inputs=[
            VariableDoc(name=v.name, lo=v.universe.lo, hi=v.universe.hi,
                        resolution=v.universe.resolution,
                        terms=[_term_doc(t) for t in v.terms])
            for v in system.inputs
        ],
        output=OutputDoc(lo=system.output_universe.lo, hi=system.output_universe.hi,
                         resolution=system.output_universe.resolution,
                         terms=[_term_doc(t) for t in system.output_terms]),
        classes=list(system.classes),
        rules=[
            RuleDoc(id=r.id,
                    antecedent=[ClauseDoc(variable=c.variable, term=c.term) for c in r.antecedent],
                    consequent=ConsequentDoc(class_=r.consequent_class, term=r.consequent_term),
                    weight=r.weight)
            for r in system.rules
        ],
    )


def dump_kb_json(doc: KnowledgeBaseDoc) -> str:
    return json.dumps(doc.model_dump(by_alias=True, exclude_none=True), indent=2,
                      ensure_ascii=False) + "\n"


# ─────────────────────────────────────────
# Files
# ─────────────────────────────────────────

def read_kb_file(path: str) -> KnowledgeBaseDoc:
    """Read and shape-check a KB file. Raises OSError or KnowledgeBaseParseError."""
    with open(path, encoding="utf-8") as f:
        text = f.read()
    return parse_document(text)


def write_kb_file(path: str, doc: KnowledgeBaseDoc) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_kb_json(doc))
    return path


def resolve_kb(path: Optional[str] = None) -> FuzzySystem:
    """The knowledge base to run with.

    Order: explicit path, then $FLOWFIS_KB_PATH, then the built-in default.
    """
    path = path or os.environ.get(KB_PATH_ENV)
    if path:
        logger.info("loading knowledge base from %s", path)
        return load_kb(read_kb_file(path))
    from tools.knowledge_base import build_default_kb

    return build_default_kb()


# --- Self-check ---
if __name__ == "__main__":
    from tools.knowledge_base import build_default_kb

    print("=== KB Document Self-Check ===\n")

    kb = build_default_kb()

    print("Test 1: save → load round trip")
    doc = save_kb(kb)
    assert load_kb(doc) == kb
    assert load_kb(dump_kb_json(doc)) == kb
    print(f"  Rules: {len(doc.rules)}, Classes: {doc.classes}")
    print("  [OK]")

    print("\nTest 2: Shipped document matches the built-in KB")
    assert load_kb(read_kb_file(DEFAULT_KB_FILE)) == kb
    print(f"  {DEFAULT_KB_FILE}")
    print("  [OK]")

    print("\nTest 3: Unordered breakpoints → parse error with location")
    raw = doc.model_dump(by_alias=True)
    raw["inputs"][0]["terms"][1]["kind"] = "triangle"
    raw["inputs"][0]["terms"][1]["breakpoints"] = [5, 3, 8]
    try:
        load_kb(raw)
        raise AssertionError("expected KnowledgeBaseParseError")
    except KnowledgeBaseParseError as e:
        assert e.location == "inputs.0.terms.1.breakpoints", e.location
        print(f"  {e}")
    print("  [OK]")

    print("\nTest 4: Missing ST rules → class-without-rules diagnostic")
    raw = doc.model_dump(by_alias=True)
    raw["rules"] = [r for r in raw["rules"] if r["consequent"]["class"] != "ST"]
    try:
        load_kb(raw)
        raise AssertionError("expected KnowledgeBaseValidationError")
    except KnowledgeBaseValidationError as e:
        assert [d.rule_id for d in e.diagnostics] == ["CL-003"]
        print(f"  {e.diagnostics[0].message}")
    print("  [OK]")

    print("\n=== All kb_document checks passed ===")
