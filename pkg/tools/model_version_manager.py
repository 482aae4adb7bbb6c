"""
Model Version Manager

Manages trained BP model versions on the filesystem. Reads existing
versions from the output directory and determines the next version number.

Layout:
    <output_root>/<slug>/v<N>/   (written by model_delivery_packager)

Input:
    slug (str) — model slug
    output_root (str) — root output directory
Output:
    dict — version info

Deterministic. No network calls.
"""

import json
import os
import re

OUTPUT_ROOT_ENV = "FLOWFIS_OUTPUT_ROOT"
VERSION_DIR_PATTERN = re.compile(r"^v(\d+)$")


def default_output_root():
    return os.environ.get(OUTPUT_ROOT_ENV, "output")


def make_slug(name):
    """Convert a model name to a kebab-case slug."""
    slug = name.lower().strip()
    slug = re.sub(r"[^a-z0-9\s-]", "", slug)
    slug = re.sub(r"\s+", "-", slug)
    slug = re.sub(r"-+", "-", slug)
    return slug.strip("-") or "unnamed"


def get_model_versions(slug, output_root=None):
    """Get all versions of a model from the filesystem.

    Args:
        slug: Model slug (kebab-case).
        output_root: Root output directory; defaults to $FLOWFIS_OUTPUT_ROOT or "output".

    Returns:
        dict with slug, versions list, total_versions, latest_version, next_version.
    """
    output_root = output_root or default_output_root()
    model_dir = os.path.join(output_root, slug)

    versions = []
    if os.path.isdir(model_dir):
        for entry in sorted(os.listdir(model_dir)):
            match = VERSION_DIR_PATTERN.match(entry)
            if match and os.path.isdir(os.path.join(model_dir, entry)):
                versions.append(_read_version_info(model_dir, entry, int(match.group(1))))

    versions.sort(key=lambda v: v["version"])
    latest = versions[-1]["version"] if versions else 0

    return {
        "slug": slug,
        "versions": versions,
        "total_versions": len(versions),
        "latest_version": latest,
        "next_version": latest + 1,
    }


def get_next_version(slug, output_root=None):
    return get_model_versions(slug, output_root)["next_version"]


def list_all_models(output_root=None):
    """List all models that have at least one version on disk.

    Returns:
        list of dicts with slug, total_versions, latest_version.
    """
    output_root = output_root or default_output_root()
    models = []
    if not os.path.isdir(output_root):
        return models

    for entry in sorted(os.listdir(output_root)):
        entry_path = os.path.join(output_root, entry)
        if os.path.isdir(entry_path) and not entry.startswith("_"):
            info = get_model_versions(entry, output_root)
            if info["total_versions"] > 0:
                models.append({
                    "slug": info["slug"],
                    "total_versions": info["total_versions"],
                    "latest_version": info["latest_version"],
                })

    return models


def _read_version_info(model_dir, version_dir, version_num):
    version_path = os.path.join(model_dir, version_dir)

    pack_path = os.path.join(version_path, "delivery_pack.json")
    pack_data = {}
    if os.path.isfile(pack_path):
        try:
            with open(pack_path) as f:
                pack_data = json.load(f)
        except (json.JSONDecodeError, OSError):
            pass

    files = sorted(
        f for f in os.listdir(version_path) if os.path.isfile(os.path.join(version_path, f))
    )

    return {
        "version": version_num,
        "version_str": version_dir,
        "path": version_path,
        "files": files,
        "model_name": pack_data.get("model_name"),
        "seed": pack_data.get("seed"),
        "final_mse": pack_data.get("final_mse"),
        "bp_accuracy": pack_data.get("bp_accuracy"),
        "fis_accuracy": pack_data.get("fis_accuracy"),
    }


# --- Self-check ---
if __name__ == "__main__":
    import shutil

    from tools.bp_baseline import TrainConfig, train
    from tools.dataset import SplitSpec, embedded_dataset, split
    from tools.evaluation import evaluate
    from tools.knowledge_base import build_default_kb
    from tools.model_delivery_packager import package_model_delivery

    print("=== Model Version Manager Self-Check ===\n")

    test_output = "output/_test_versions"
    if os.path.exists(test_output):
        shutil.rmtree(test_output)

    kb = build_default_kb()
    train_set, test_set = split(embedded_dataset(), SplitSpec.paper())
    model = train(TrainConfig(epochs=20, seed=1), train_set)
    report = evaluate(kb, test_set, bp_model=model, split="paper", seed=1)

    def _build(name, version):
        return package_model_delivery(
            slug=make_slug(name), version=version, name=name,
            model=model, report=report, output_root=test_output,
        )

    print("Test 1: No versions → next_version = 1")
    assert get_model_versions("nonexistent", test_output)["next_version"] == 1
    print("  [OK]")

    print("\nTest 2: v1 then v2")
    _build("Baseline A", 1)
    _build("Baseline A", 2)
    info = get_model_versions("baseline-a", test_output)
    assert info["total_versions"] == 2 and info["next_version"] == 3
    assert info["versions"][0]["model_name"] == "Baseline A"
    assert "model.json" in info["versions"][0]["files"]
    print(f"  Versions: {[v['version'] for v in info['versions']]}")
    print("  [OK]")

    print("\nTest 3: list_all_models")
    _build("Baseline B", 1)
    assert [m["slug"] for m in list_all_models(test_output)] == ["baseline-a", "baseline-b"]
    print("  [OK]")

    shutil.rmtree(test_output)
    print("\n=== All model_version_manager checks passed ===")
