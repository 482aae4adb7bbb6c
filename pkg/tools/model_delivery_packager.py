"""
Model Delivery Packager

Writes a trained BP model and its evaluation under
<output_root>/<slug>/v<version>/.

Files:
    model.json               — model file (weights, normalizer, config, history)
    evaluation_report.json   — EvaluationReport JSON
    delivery_summary.md      — human-readable summary
    delivery_pack.json       — index read back by model_version_manager

Input:
    slug (str), version (int), name (str)
    model (TrainedModel), report (EvaluationReport)
Output:
    dict — delivery pack (file list and headline numbers)

No network calls. Only delivery_summary.md carries a timestamp.
"""

import json
import os
from datetime import datetime, timezone

from tools.bp_baseline import dump_model_json
from tools.evaluation import BP, FIS, format_report_table, report_json
from tools.model_version_manager import default_output_root


def package_model_delivery(slug, version, name, model, report, output_root=None):
    """Package a trained model and its evaluation into a version directory.

    Args:
        slug: Model slug (kebab-case).
        version: Version number (int).
        name: Display name.
        model: TrainedModel.
        report: EvaluationReport for the model's test split.
        output_root: Root output directory.

    Returns:
        dict — delivery pack.
    """
    output_root = output_root or default_output_root()
    version_str = f"v{version}"
    output_dir = os.path.join(output_root, slug, version_str)
    os.makedirs(output_dir, exist_ok=True)

    files_written = []

    def _write_text(filename, text):
        path = os.path.join(output_dir, filename)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        files_written.append(filename)
        return path

    def _write_json(filename, data):
        return _write_text(filename, json.dumps(data, indent=2, default=str) + "\n")

    _write_text("model.json", dump_model_json(model))
    _write_text("evaluation_report.json", report_json(report))

    history = model.history
    fis = report.models.get(FIS)
    bp = report.models.get(BP)
    config = model.config

    summary_md = f"""# Model Delivery Summary — {name}

**Slug:** {slug}
**Version:** {version_str}
**Date:** {datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")}

## Network
- Layers: {" → ".join(str(n) for n in model.params.layer_sizes)}
- Seed: {config.seed}
- Epochs: {history.epochs_run} of {config.epochs} ({history.stop_reason})
- MSE: {history.initial_mse:.6g} → {history.final_mse:.6g}
- Converged: {history.converged}

## Evaluation ({report.split} split, {report.test_size} points)
- FIS accuracy: {f"{fis.correct}/{fis.total}" if fis else "n/a"}
- BP accuracy: {f"{bp.correct}/{bp.total}" if bp else "n/a"}
- Disagreements: {len(report.disagreements)}

```
{format_report_table(report)}```

## Artifacts
{chr(10).join(f"- {f}" for f in files_written)}
- delivery_summary.md
"""
    _write_text("delivery_summary.md", summary_md)

    delivery_pack = {
        "slug": slug,
        "version": version,
        "version_str": version_str,
        "model_name": name,
        "output_dir": output_dir,
        "files": files_written + ["delivery_pack.json"],
        "seed": config.seed,
        "layer_sizes": list(model.params.layer_sizes),
        "epochs_run": history.epochs_run,
        "final_mse": history.final_mse,
        "converged": history.converged,
        "fis_accuracy": fis.accuracy if fis else None,
        "bp_accuracy": bp.accuracy if bp else None,
    }
    _write_json("delivery_pack.json", delivery_pack)

    return delivery_pack


# --- Self-check ---
if __name__ == "__main__":
    import shutil

    from tools.bp_baseline import TrainConfig, load_model_file, train
    from tools.dataset import SplitSpec, embedded_dataset, split
    from tools.evaluation import evaluate
    from tools.knowledge_base import build_default_kb

    print("=== Model Delivery Packager Self-Check ===\n")

    test_output = "output/_test_delivery"
    if os.path.exists(test_output):
        shutil.rmtree(test_output)

    kb = build_default_kb()
    train_set, test_set = split(embedded_dataset(), SplitSpec.paper())
    model = train(TrainConfig(epochs=30, seed=7), train_set)
    report = evaluate(kb, test_set, bp_model=model, split="paper", seed=7)

    print("Test 1: Delivery pack")
    pack = package_model_delivery("baseline", 1, "Baseline", model, report, test_output)
    assert pack["files"] == ["model.json", "evaluation_report.json",
                             "delivery_summary.md", "delivery_pack.json"]
    for f in pack["files"]:
        assert os.path.isfile(os.path.join(pack["output_dir"], f)), f
    print(f"  Files: {pack['files']}")
    print("  [OK]")

    print("\nTest 2: Model file reloads to the same weights")
    reloaded = load_model_file(os.path.join(pack["output_dir"], "model.json"))
    assert reloaded.params.equals(model.params)
    print("  [OK]")

    shutil.rmtree(test_output)
    print("\n=== All model_delivery_packager checks passed ===")
