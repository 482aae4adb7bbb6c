"""
Evaluation

Scores the fuzzy classifier (and optionally a trained BP baseline) against
labeled records and assembles the comparison report.

Report contents:
  rows           — per point: inputs, actual, FIS prediction (+ its Φ), BP prediction
  models         — per model: accuracy, 4×4 confusion (rows = actual,
                   columns = predicted, W/O, ST, DO/W&W, DW/O&O/W order),
                   accuracy per provenance
  disagreements  — row indices where FIS and BP predict differently

Input:
    system (FuzzySystem) — knowledge base
    records (list[ExperimentRecord]) — evaluation points
    bp_model (TrainedModel | None)
Output:
    EvaluationReport (pydantic), text table, JSON

Deterministic. No network calls.
"""

from __future__ import annotations

import json
import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel

from tools.bp_baseline import TrainConfig, TrainedModel, predict_class, predict_raw, train
from tools.dataset import ExperimentRecord
from tools.fuzzy_core import FuzzySystem
from tools.knowledge_base import FlowPattern, classify

logger = logging.getLogger(__name__)

FIS = "fis"
BP = "bp"


class EvaluationRow(BaseModel):
    angle: float
    flow: float
    watercut: float
    provenance: str
    actual: str
    fis: str
    fis_phi: float
    bp: Optional[str] = None
    bp_raw: Optional[float] = None


class ModelScore(BaseModel):
    correct: int
    total: int
    accuracy: float
    confusion: list[list[int]]
    by_provenance: dict[str, dict]


class EvaluationReport(BaseModel):
    split: str
    seed: Optional[int] = None
    train_size: int = 0
    test_size: int
    rows: list[EvaluationRow]
    models: dict[str, ModelScore]
    disagreements: list[int]
    seed_study: Optional[dict] = None


def confusion_matrix(actual: Sequence[FlowPattern], predicted: Sequence[FlowPattern]) -> list[list[int]]:
    """Counts indexed [actual][predicted] in FlowPattern order."""
    if len(actual) != len(predicted):
        raise ValueError(f"length mismatch: {len(actual)} actual vs {len(predicted)} predicted")
    order = list(FlowPattern)
    matrix = [[0] * len(order) for _ in order]
    for a, p in zip(actual, predicted):
        matrix[order.index(a)][order.index(p)] += 1
    return matrix


def score_model(actual: Sequence[FlowPattern], predicted: Sequence[FlowPattern],
                provenance: Sequence[str]) -> ModelScore:
    matrix = confusion_matrix(actual, predicted)
    correct = sum(matrix[i][i] for i in range(len(matrix)))
    total = len(actual)

    by_provenance = {}
    for tag in sorted(set(provenance)):
        hits = [a is p for a, p, t in zip(actual, predicted, provenance) if t == tag]
        by_provenance[tag] = {
            "correct": sum(hits),
            "total": len(hits),
            "accuracy": sum(hits) / len(hits),
        }

    return ModelScore(
        correct=correct,
        total=total,
        accuracy=correct / total if total else 0.0,
        confusion=matrix,
        by_provenance=by_provenance,
    )


def evaluate(system: FuzzySystem, records: Sequence[ExperimentRecord], *,
             bp_model: Optional[TrainedModel] = None, split: str = "custom",
             seed: Optional[int] = None, train_size: int = 0) -> EvaluationReport:
    """Classify every record with the FIS (and BP when given) and score both.

    Raises:
        ValueError: records is empty.
    """
    records = list(records)
    if not records:
        raise ValueError("nothing to evaluate: no records")

    rows = []
    fis_predictions, bp_predictions = [], []
    for record in records:
        result = classify(system, record.point)
        fis_predictions.append(result.predicted)
        row = EvaluationRow(
            angle=record.angle, flow=record.flow, watercut=record.watercut,
            provenance=record.provenance.value,
            actual=record.pattern.label,
            fis=result.predicted.label,
            fis_phi=result.phi[result.predicted],
        )
        if bp_model is not None:
            pattern = predict_class(bp_model.params, bp_model.normalizer, record.point)
            bp_predictions.append(pattern)
            row.bp = pattern.label
            row.bp_raw = predict_raw(bp_model.params, bp_model.normalizer, record.point)
        rows.append(row)

    actual = [r.pattern for r in records]
    provenance = [r.provenance.value for r in records]
    models = {FIS: score_model(actual, fis_predictions, provenance)}
    disagreements = []
    if bp_model is not None:
        models[BP] = score_model(actual, bp_predictions, provenance)
        disagreements = [i for i, (f, b) in enumerate(zip(fis_predictions, bp_predictions))
                         if f is not b]

    logger.info("evaluated %d points: FIS %d/%d%s", len(records), models[FIS].correct,
                models[FIS].total,
                f", BP {models[BP].correct}/{models[BP].total}" if BP in models else "")
    return EvaluationReport(
        split=split,
        seed=seed,
        train_size=train_size,
        test_size=len(records),
        rows=rows,
        models=models,
        disagreements=disagreements,
    )


def bp_seed_study(train_records: Sequence[ExperimentRecord], test_records: Sequence[ExperimentRecord],
                  seeds: Sequence[int], config: Optional[TrainConfig] = None) -> dict:
    """Train one BP network per seed on the same split and score each on test_records.

    Returns:
        dict with seeds, accuracies (same order), median_accuracy, min/max.
    """
    if not seeds:
        raise ValueError("seed study needs at least one seed")
    base = config or TrainConfig()
    actual = [r.pattern for r in test_records]
    accuracies = []
    for seed in seeds:
        model = train(base.model_copy(update={"seed": int(seed)}), train_records)
        predicted = [predict_class(model.params, model.normalizer, r.point) for r in test_records]
        accuracies.append(sum(a is p for a, p in zip(actual, predicted)) / len(actual))
        logger.debug("seed %s: BP test accuracy %.4f", seed, accuracies[-1])
    return {
        "seeds": [int(s) for s in seeds],
        "accuracies": accuracies,
        "median_accuracy": float(np.median(accuracies)),
        "min_accuracy": min(accuracies),
        "max_accuracy": max(accuracies),
    }


def _percent(watercut: float) -> str:
    return f"{watercut * 100:g}"


def format_report_table(report: EvaluationReport) -> str:
    """Text table in the published layout: inputs, actual pattern, output patterns."""
    has_bp = BP in report.models
    header = f"{'Angle':>6} {'Flow':>6} {'WC%':>5}  {'Actual':<9} {'FIS':<9}"
    if has_bp:
        header += f" {'BP':<9}"
    lines = [header, "-" * len(header)]
    for i, row in enumerate(report.rows):
        line = (f"{row.angle:>6g} {row.flow:>6g} {_percent(row.watercut):>5}  "
                f"{row.actual:<9} {row.fis:<9}")
        if has_bp:
            line += f" {row.bp:<9}"
            if i in report.disagreements:
                line += " *"
        lines.append(line)

    lines.append("")
    for name, score in report.models.items():
        lines.append(f"{name.upper()} accuracy: {score.correct}/{score.total} "
                     f"({score.accuracy:.1%})")
        for tag, part in score.by_provenance.items():
            lines.append(f"  {tag}: {part['correct']}/{part['total']}")
        lines.append("  confusion (rows actual, cols predicted): "
                     + " ".join(p.label for p in FlowPattern))
        for pattern, counts in zip(FlowPattern, score.confusion):
            lines.append(f"    {pattern.label:<9} " + " ".join(f"{c:>3}" for c in counts))
    if has_bp:
        lines.append(f"Disagreements (FIS vs BP): {len(report.disagreements)}")
    if report.seed_study:
        study = report.seed_study
        lines.append(f"BP seed study over {len(study['seeds'])} seeds: "
                     f"median accuracy {study['median_accuracy']:.1%} "
                     f"(min {study['min_accuracy']:.1%}, max {study['max_accuracy']:.1%})")
    return "\n".join(lines) + "\n"


def report_json(report: EvaluationReport) -> str:
    return json.dumps(report.model_dump(), indent=2) + "\n"


# --- Self-check ---
if __name__ == "__main__":
    from tools.dataset import SplitSpec, embedded_dataset, split as split_records
    from tools.knowledge_base import build_default_kb

    print("=== Evaluation Self-Check ===\n")

    kb = build_default_kb()
    train_set, test_set = split_records(embedded_dataset(), SplitSpec.paper())

    print("Test 1: FIS on the published test points")
    report = evaluate(kb, test_set, split="paper")
    fis = report.models[FIS]
    assert fis.correct >= 17 and fis.total == 18
    assert sum(map(sum, fis.confusion)) == 18
    print(f"  FIS: {fis.correct}/{fis.total}")
    print("  [OK]")

    print("\nTest 2: Head-to-head with BP")
    model = train(TrainConfig(seed=42), train_set)
    report2 = evaluate(kb, test_set, bp_model=model, split="paper", seed=42,
                       train_size=len(train_set))
    bp = report2.models[BP]
    assert all(row.bp is not None for row in report2.rows)
    assert report2.disagreements == [i for i, r in enumerate(report2.rows) if r.fis != r.bp]
    print(f"  BP: {bp.correct}/{bp.total}, disagreements: {len(report2.disagreements)}")
    print("  [OK]")

    print("\nTest 3: Determinism")
    again = evaluate(kb, test_set, bp_model=train(TrainConfig(seed=42), train_set),
                     split="paper", seed=42, train_size=len(train_set))
    assert report_json(again) == report_json(report2)
    print("  [OK]")

    print()
    print(format_report_table(report2))
    print("=== All evaluation checks passed ===")
