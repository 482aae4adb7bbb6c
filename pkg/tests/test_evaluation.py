import json

import pytest

from tools.bp_baseline import TrainConfig, code_from_output, predict_class, train
from tools.dataset import Provenance
from tools.evaluation import (
    BP,
    FIS,
    bp_seed_study,
    confusion_matrix,
    evaluate,
    format_report_table,
    report_json,
    score_model,
)
from tools.knowledge_base import FlowPattern

WO, ST, DOW, DWO = FlowPattern


@pytest.fixture(scope="module")
def bp_model(paper_split):
    return train(TrainConfig(seed=42), paper_split[0])


def test_confusion_matrix_layout():
    matrix = confusion_matrix([WO, WO, ST, DWO], [WO, DOW, ST, WO])
    assert matrix == [
        [1, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 0],
        [1, 0, 0, 0],
    ]
    with pytest.raises(ValueError):
        confusion_matrix([WO], [])


def test_score_model_by_provenance():
    score = score_model([WO, ST, DOW], [WO, WO, DOW], ["paper-table", "reconstructed", "paper-table"])
    assert (score.correct, score.total) == (2, 3)
    assert score.accuracy == pytest.approx(2 / 3)
    assert score.by_provenance == {
        "paper-table": {"correct": 2, "total": 2, "accuracy": 1.0},
        "reconstructed": {"correct": 0, "total": 1, "accuracy": 0.0},
    }


def test_fis_on_published_points(kb, paper_split):
    report = evaluate(kb, paper_split[1], split="paper")
    fis = report.models[FIS]
    assert fis.total == 18 and fis.correct >= 17
    assert sum(map(sum, fis.confusion)) == 18
    assert set(fis.by_provenance) == {Provenance.PAPER_TABLE.value}
    assert BP not in report.models
    assert report.disagreements == []
    assert all(row.bp is None for row in report.rows)
    assert all(0.0 <= row.fis_phi <= 1.0 for row in report.rows)


def test_head_to_head(kb, paper_split, bp_model):
    train_set, test_set = paper_split
    report = evaluate(kb, test_set, bp_model=bp_model, split="paper", seed=42,
                      train_size=len(train_set))
    assert report.train_size == 42 and report.test_size == 18
    assert report.disagreements == [i for i, r in enumerate(report.rows) if r.fis != r.bp]
    assert report.models[BP].correct == sum(r.bp == r.actual for r in report.rows)


def test_bp_rows_use_the_model_prediction(paper_split, bp_model, kb):
    test_set = paper_split[1]
    report = evaluate(kb, test_set, bp_model=bp_model)
    for record, row in zip(test_set, report.rows):
        assert row.bp == predict_class(bp_model.params, bp_model.normalizer, record.point).label
        assert row.bp == FlowPattern.from_code(code_from_output(row.bp_raw)).label

    study = bp_seed_study(paper_split[0], test_set, [42])
    assert study["accuracies"] == [report.models[BP].accuracy]


def test_report_is_deterministic(kb, paper_split):
    train_set, test_set = paper_split
    first = evaluate(kb, test_set, bp_model=train(TrainConfig(seed=42), train_set),
                     split="paper", seed=42)
    second = evaluate(kb, test_set, bp_model=train(TrainConfig(seed=42), train_set),
                      split="paper", seed=42)
    assert report_json(first) == report_json(second)
    assert json.loads(report_json(first))["models"]["bp"]["total"] == 18


def test_empty_records_rejected(kb):
    with pytest.raises(ValueError):
        evaluate(kb, [])


def test_table_layout(kb, paper_split, bp_model):
    report = evaluate(kb, paper_split[1], bp_model=bp_model, split="paper")
    table = format_report_table(report)
    lines = table.splitlines()
    assert lines[0].split() == ["Angle", "Flow", "WC%", "Actual", "FIS", "BP"]
    assert lines[2].split()[:4] == ["0", "100", "80", "DO/W&W"]
    assert "FIS accuracy:" in table and "BP accuracy:" in table
    assert f"Disagreements (FIS vs BP): {len(report.disagreements)}" in table


def test_seed_study(kb, paper_split):
    train_set, test_set = paper_split
    study = bp_seed_study(train_set, test_set, range(10))
    assert study["seeds"] == list(range(10))
    assert len(study["accuracies"]) == 10
    assert study["min_accuracy"] <= study["median_accuracy"] <= study["max_accuracy"]

    fis_accuracy = evaluate(kb, test_set).models[FIS].accuracy
    assert 0.55 <= study["median_accuracy"] <= fis_accuracy

    with pytest.raises(ValueError):
        bp_seed_study(train_set, test_set, [])
