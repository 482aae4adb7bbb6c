import json
import os

import pytest

from tools.bp_baseline import TrainConfig, load_model_file, train
from tools.evaluation import evaluate
from tools.model_delivery_packager import package_model_delivery
from tools.model_version_manager import (
    get_model_versions,
    get_next_version,
    list_all_models,
    make_slug,
)


@pytest.fixture(scope="module")
def trained(kb, paper_split):
    train_set, test_set = paper_split
    model = train(TrainConfig(epochs=20, seed=1), train_set)
    return model, evaluate(kb, test_set, bp_model=model, split="paper", seed=1)


def _build(trained, name, version, output_root=None):
    model, report = trained
    return package_model_delivery(make_slug(name), version, name, model, report, output_root)


@pytest.mark.parametrize("name, slug", [
    ("Baseline A", "baseline-a"),
    ("  BP   seed 42!  ", "bp-seed-42"),
    ("---", "unnamed"),
])
def test_make_slug(name, slug):
    assert make_slug(name) == slug


def test_empty_root(output_root):
    assert get_model_versions("nothing")["next_version"] == 1
    assert list_all_models() == []


def test_pack_files(trained, output_root):
    pack = _build(trained, "Baseline", 1)
    assert pack["output_dir"] == os.path.join(output_root, "baseline", "v1")
    assert pack["files"] == ["model.json", "evaluation_report.json",
                             "delivery_summary.md", "delivery_pack.json"]
    for name in pack["files"]:
        assert os.path.isfile(os.path.join(pack["output_dir"], name))
    assert pack["layer_sizes"] == [3, 8, 6, 1]
    assert pack["bp_accuracy"] == trained[1].models["bp"].accuracy

    reloaded = load_model_file(os.path.join(pack["output_dir"], "model.json"))
    assert reloaded.params.equals(trained[0].params)
    with open(os.path.join(pack["output_dir"], "evaluation_report.json"), encoding="utf-8") as f:
        assert json.load(f)["test_size"] == 18


def test_versions_accumulate(trained, output_root):
    _build(trained, "Baseline A", 1)
    _build(trained, "Baseline A", 2)
    _build(trained, "Baseline B", 1)
    os.makedirs(os.path.join(output_root, "baseline-a", "drafts"))

    info = get_model_versions("baseline-a")
    assert [v["version"] for v in info["versions"]] == [1, 2]
    assert info["latest_version"] == 2 and get_next_version("baseline-a") == 3
    assert info["versions"][0]["model_name"] == "Baseline A"
    assert info["versions"][1]["seed"] == 1
    assert [m["slug"] for m in list_all_models()] == ["baseline-a", "baseline-b"]


def test_explicit_root_wins(trained, output_root, tmp_path):
    other = str(tmp_path / "elsewhere")
    _build(trained, "Baseline", 1, other)
    assert get_next_version("baseline") == 1
    assert get_next_version("baseline", other) == 2


def test_corrupt_pack_is_tolerated(trained, output_root):
    pack = _build(trained, "Baseline", 1)
    with open(os.path.join(pack["output_dir"], "delivery_pack.json"), "w") as f:
        f.write("{")
    version = get_model_versions("baseline")["versions"][0]
    assert version["model_name"] is None
    assert "model.json" in version["files"]
