"""
flowfis — command-line surface

Commands:
  classify        — one operating point → predicted pattern, Φ per class, optional trace
  evaluate        — FIS (and BP) on a split → comparison table, optional JSON report
  train-bp        — train the BP baseline → model file (+ MSE curve and fit CSVs)
  sweep           — flow × water-cut map at a fixed angle → CSV or SVG
  validate-kb     — knowledge-base file → diagnostics
  export-dataset  — embedded dataset → CSV (+ fluid/design metadata JSON)
  export-kb       — built-in knowledge base → JSON document

Exit codes:
  0 — success
  1 — usage error (bad or missing flags, invalid hyperparameters or axes)
  2 — data / knowledge-base / model-file error
"""

import argparse
import json
import logging
import os
import sys

from dotenv import load_dotenv
from pydantic import ValidationError

from tools.bp_baseline import (
    ModelFileError,
    TrainConfig,
    fit_rows_csv,
    load_model_file,
    save_model_file,
    train,
    training_curve_csv,
)
from tools.dataset import (
    DESIGN_ANGLES,
    DESIGN_FLOWS,
    DESIGN_WATERCUTS,
    FLUID_PROPERTIES,
    DatasetError,
    SplitError,
    SplitSpec,
    embedded_dataset,
    read_csv_file,
    reconstruction_agreement,
    serialize_csv,
    split,
)
from tools.evaluation import bp_seed_study, evaluate, format_report_table, report_json
from tools.flow_map_sweep import Axis, AxisError, grid_to_csv, grid_to_svg, sweep
from tools.fuzzy_core import FuzzyConfigError
from tools.kb_document import (
    DEFAULT_KB_FILE,
    KB_PATH_ENV,
    KnowledgeBaseParseError,
    dump_kb_json,
    parse_kb,
    read_kb_file,
    resolve_kb,
    save_kb,
)
from tools.knowledge_base import FlowPattern, OperatingPoint, build_default_kb, classify
from tools.validate_fuzzy_system import validate_system

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

LOG_LEVEL_ENV = "FLOWFIS_LOG_LEVEL"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ─────────────────────────────────────────
# Helpers
# ─────────────────────────────────────────

def _load_records(args):
    return read_csv_file(args.data) if args.data else embedded_dataset()


def _split_spec(args):
    if args.split == "paper":
        return SplitSpec.paper()
    return SplitSpec.seeded_random(args.test_fraction, args.split_seed)


def _train_config(args):
    return TrainConfig(seed=args.seed, epochs=args.epochs, hidden=tuple(args.hidden))


def _write(path, text):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


# ─────────────────────────────────────────
# Commands
# ─────────────────────────────────────────

def cmd_classify(args):
    system = resolve_kb(args.kb)
    result = classify(system, OperatingPoint(args.angle, args.flow, args.watercut))

    if args.json:
        print(json.dumps(result.to_dict(), indent=2))
        return EXIT_OK

    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    p = result.point
    print(f"Inputs: angle={p.angle:g}° flow={p.flow:g} m³/d watercut={p.watercut:g}")
    print(f"Predicted: {result.predicted.label} (code {result.predicted.code})")
    print("Φ:")
    for pattern in FlowPattern:
        marker = "  <" if pattern is result.predicted else ""
        print(f"  {pattern.label:<9} {result.phi[pattern]:.4f}{marker}")

    if args.trace:
        rules = {r.id: r for r in system.rules}
        print("Membership degrees:")
        for name, degrees in result.degrees.items():
            shown = ", ".join(f"{label}={mu:.4f}" for label, mu in degrees.items() if mu > 0)
            print(f"  {name}: {shown}")
        print("Fired rules:")
        for pattern in FlowPattern:
            for fired in result.trace[pattern]:
                print(f"  {fired.rule_id} {fired.strength:.4f}  {rules[fired.rule_id].describe()}")
    return EXIT_OK


def cmd_evaluate(args):
    system = resolve_kb(args.kb)
    records = _load_records(args)
    train_set, test_set = split(records, _split_spec(args))

    bp_model = None
    if not args.fis_only:
        if args.bp_model:
            bp_model = load_model_file(args.bp_model)
        else:
            bp_model = train(_train_config(args), train_set)

    report = evaluate(system, test_set, bp_model=bp_model, split=args.split,
                      seed=None if args.fis_only else args.seed, train_size=len(train_set))
    if args.seed_study:
        seeds = [args.seed + i for i in range(args.seed_study)]
        report.seed_study = bp_seed_study(train_set, test_set, seeds, _train_config(args))

    print(format_report_table(report), end="")
    if args.report:
        _write(args.report, report_json(report))
        print(f"Report written to {args.report}")
    return EXIT_OK


def cmd_train_bp(args):
    records = _load_records(args)
    if args.split == "all":
        train_set = records
    else:
        train_set, _ = split(records, _split_spec(args))

    model = train(_train_config(args), train_set)
    save_model_file(args.out, model)

    h = model.history
    print(f"Trained on {len(train_set)} records: layers {model.params.layer_sizes}")
    print(f"MSE {h.initial_mse:.6g} → {h.final_mse:.6g} after {h.epochs_run} epochs ({h.stop_reason})")
    if h.degenerate:
        print("warning: identical inputs with conflicting targets; goal not reachable",
              file=sys.stderr)
    print(f"Model written to {args.out}")
    if args.curve:
        _write(args.curve, training_curve_csv(h))
        print(f"Training curve written to {args.curve}")
    if args.fit:
        _write(args.fit, fit_rows_csv(model, train_set))
        print(f"Training-set fit written to {args.fit}")
    return EXIT_OK


def cmd_sweep(args):
    system = resolve_kb(args.kb)
    flow_steps = args.flow_steps or args.steps
    wc_steps = args.wc_steps or args.steps
    grid = sweep(
        system, args.angle,
        Axis(args.flow_min, args.flow_max, flow_steps),
        Axis(args.wc_min, args.wc_max, wc_steps),
        workers=args.workers,
    )
    text = grid_to_svg(grid) if args.format == "svg" else grid_to_csv(grid)
    if args.out:
        _write(args.out, text)
        counts = ", ".join(f"{p.label}={grid.count(p)}" for p in FlowPattern)
        print(f"{len(grid.cells)} cells at {args.angle:g}° ({counts}) written to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_validate_kb(args):
    path = args.path or os.environ.get(KB_PATH_ENV) or DEFAULT_KB_FILE
    system = parse_kb(read_kb_file(path))
    diagnostics = validate_system(system)
    if not diagnostics:
        print("OK")
        return EXIT_OK
    for d in diagnostics:
        print(f"{path}:{d.location}: [{d.rule_id}] {d.message}")
    print(f"{len(diagnostics)} diagnostic(s)", file=sys.stderr)
    return EXIT_DATA


def cmd_export_dataset(args):
    records = embedded_dataset()
    text = serialize_csv(records)
    if args.out:
        _write(args.out, text)
        print(f"Dataset written to {args.out}")
    else:
        print(text, end="")
    if args.metadata:
        _write(args.metadata, json.dumps({
            "fluid_properties": FLUID_PROPERTIES.to_dict(),
            "design_angles_deg": list(DESIGN_ANGLES),
            "design_flows_m3d": list(DESIGN_FLOWS),
            "design_watercuts_frac": list(DESIGN_WATERCUTS),
            "reconstruction_agreement": reconstruction_agreement(records),
        }, indent=2) + "\n")
    return EXIT_OK


def cmd_export_kb(args):
    text = dump_kb_json(save_kb(build_default_kb()))
    if args.out:
        _write(args.out, text)
        print(f"Knowledge base written to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


# ─────────────────────────────────────────
# Parser
# ─────────────────────────────────────────

def _add_data_flags(p, splits=("paper", "random")):
    p.add_argument("--data", help="dataset CSV (default: embedded 60-point dataset)")
    p.add_argument("--split", choices=list(splits), default="paper")
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.add_argument("--split-seed", type=int, default=0)


def _add_train_flags(p):
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--hidden", type=int, nargs=2, default=[8, 6], metavar=("H1", "H2"))


def build_parser():
    parser = _Parser(prog="flowfis", description="Fuzzy flow-pattern classifier for oil-water flow.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="classify one operating point")
    p.add_argument("--angle", type=float, required=True, help="inclination, degrees (0 vertical)")
    p.add_argument("--flow", type=float, required=True, help="total flow, m³/d")
    p.add_argument("--watercut", type=float, required=True, help="water cut fraction")
    p.add_argument("--kb", help=f"knowledge-base JSON (default: ${KB_PATH_ENV} or built-in)")
    p.add_argument("--trace", action="store_true", help="print degrees and fired rules")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("evaluate", help="compare FIS and BP on a test split")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--kb")
    p.add_argument("--bp-model", help="trained model file (default: train one on the split)")
    p.add_argument("--fis-only", action="store_true")
    p.add_argument("--seed-study", type=int, default=0, metavar="N",
                   help="also train N seeds and report the median BP accuracy")
    p.add_argument("--report", help="write the JSON report here")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("train-bp", help="train the BP baseline")
    _add_data_flags(p, splits=("paper", "random", "all"))
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--curve", help="also write the per-epoch MSE curve as CSV")
    p.add_argument("--fit", help="also write the training-set fit rows as CSV")
    p.set_defaults(handler=cmd_train_bp)

    p = sub.add_parser("sweep", help="flow-pattern map at a fixed angle")
    p.add_argument("--angle", type=float, required=True)
    p.add_argument("--flow-min", type=float, default=100.0)
    p.add_argument("--flow-max", type=float, default=600.0)
    p.add_argument("--wc-min", type=float, default=0.0)
    p.add_argument("--wc-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--flow-steps", type=int)
    p.add_argument("--wc-steps", type=int)
    p.add_argument("--format", choices=["csv", "svg"], default="csv")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--kb")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("validate-kb", help="check a knowledge-base file")
    p.add_argument("path", nargs="?")
    p.set_defaults(handler=cmd_validate_kb)

    p = sub.add_parser("export-dataset", help="write the embedded dataset as CSV")
    p.add_argument("--out")
    p.add_argument("--metadata", help="also write fluid properties and design grid JSON")
    p.set_defaults(handler=cmd_export_dataset)

    p = sub.add_parser("export-kb", help="write the built-in knowledge base as JSON")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_export_kb)

    return parser


def main(argv=None):
    load_dotenv()
    level = os.environ.get(LOG_LEVEL_ENV, "WARNING").strip().upper()
    if not isinstance(logging.getLevelName(level), int):
        print(f"error: {LOG_LEVEL_ENV}={level!r} is not a log level", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)

    try:
        return args.handler(args)
    except (ValidationError, AxisError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (KnowledgeBaseParseError, FuzzyConfigError, DatasetError, SplitError,
            ModelFileError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
