"""
Dataset

Experimental oil-water flow-pattern records: CSV parsing and serialization,
the embedded 60-point design-grid dataset, train/test splitting and the
loop's fluid properties.

CSV format (UTF-8, comma-separated, dot decimal, LF or CRLF):
    angle_deg,flow_m3d,watercut_frac,pattern[,provenance]
    0,100,0.8,DO/W&W,paper-table

Water cut is a fraction in [0, 1]. provenance is "paper-table" for the 18
published test points and "reconstructed" otherwise (the default when the
column is absent).

Input:  CSV text
Output: list[ExperimentRecord]

Deterministic. No network calls.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd

from tools.knowledge_base import (
    ANGLE_RANGE,
    FLOW_RANGE,
    WATERCUT_RANGE,
    FlowPattern,
    OperatingPoint,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("angle_deg", "flow_m3d", "watercut_frac", "pattern")
PROVENANCE_COLUMN = "provenance"

DESIGN_ANGLES = (0.0, 60.0, 85.0, 90.0)
DESIGN_FLOWS = (100.0, 300.0, 600.0)
DESIGN_WATERCUTS = (0.2, 0.4, 0.6, 0.8, 0.9)


class DatasetError(ValueError):
    """Malformed CSV content; .line is the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SplitError(ValueError):
    pass


class Provenance(Enum):
    PAPER_TABLE = "paper-table"
    RECONSTRUCTED = "reconstructed"


@dataclass(frozen=True)
class ExperimentRecord:
    angle: float
    flow: float
    watercut: float
    pattern: FlowPattern
    provenance: Provenance = Provenance.RECONSTRUCTED

    @property
    def point(self) -> OperatingPoint:
        return OperatingPoint(self.angle, self.flow, self.watercut)

    @property
    def coordinates(self) -> tuple[float, float, float]:
        return self.angle, self.flow, self.watercut


@dataclass(frozen=True)
class FluidProperties:
    """Test-loop fluids and pipe. Metadata only; inference never reads it."""

    oil_density_g_cm3: float = 0.8263
    oil_viscosity_mpa_s: float = 2.92
    water_density_g_cm3: float = 0.9884
    water_viscosity_mpa_s: float = 1.16
    pipe_inner_diameter_mm: float = 159.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")

    def to_dict(self) -> dict:
        return dict(vars(self))


FLUID_PROPERTIES = FluidProperties()

# Published test points: (angle, flow, watercut, actual pattern)
PAPER_TEST_POINTS = (
    (0.0, 100.0, 0.8, FlowPattern.DOW),
    (0.0, 100.0, 0.9, FlowPattern.DOW),
    (0.0, 300.0, 0.2, FlowPattern.DOW),
    (0.0, 300.0, 0.4, FlowPattern.DOW),
    (0.0, 600.0, 0.2, FlowPattern.WO),
    (60.0, 100.0, 0.2, FlowPattern.DOW),
    (60.0, 100.0, 0.4, FlowPattern.DOW),
    (60.0, 300.0, 0.6, FlowPattern.WO),
    (60.0, 300.0, 0.8, FlowPattern.DWO),
    (60.0, 600.0, 0.9, FlowPattern.DWO),
    (85.0, 100.0, 0.2, FlowPattern.ST),
    (85.0, 100.0, 0.9, FlowPattern.ST),
    (85.0, 300.0, 0.8, FlowPattern.DOW),
    (85.0, 300.0, 0.9, FlowPattern.DOW),
    (85.0, 600.0, 0.6, FlowPattern.WO),
    (90.0, 100.0, 0.8, FlowPattern.ST),
    (90.0, 300.0, 0.4, FlowPattern.DWO),
    (90.0, 600.0, 0.8, FlowPattern.DWO),
)

_EMBEDDED_CSV = """\
angle_deg,flow_m3d,watercut_frac,pattern,provenance
0,100,0.2,DO/W&W,reconstructed
0,100,0.4,DO/W&W,reconstructed
0,100,0.6,DO/W&W,reconstructed
0,100,0.8,DO/W&W,paper-table
0,100,0.9,DO/W&W,paper-table
0,300,0.2,DO/W&W,paper-table
0,300,0.4,DO/W&W,paper-table
0,300,0.6,DO/W&W,reconstructed
0,300,0.8,DO/W&W,reconstructed
0,300,0.9,DO/W&W,reconstructed
0,600,0.2,W/O,paper-table
0,600,0.4,W/O,reconstructed
0,600,0.6,DW/O&O/W,reconstructed
0,600,0.8,DW/O&O/W,reconstructed
0,600,0.9,DO/W&W,reconstructed
60,100,0.2,DO/W&W,paper-table
60,100,0.4,DO/W&W,paper-table
60,100,0.6,DO/W&W,reconstructed
60,100,0.8,DO/W&W,reconstructed
60,100,0.9,DO/W&W,reconstructed
60,300,0.2,W/O,reconstructed
60,300,0.4,W/O,reconstructed
60,300,0.6,W/O,paper-table
60,300,0.8,DW/O&O/W,paper-table
60,300,0.9,DW/O&O/W,reconstructed
60,600,0.2,W/O,reconstructed
60,600,0.4,W/O,reconstructed
60,600,0.6,W/O,reconstructed
60,600,0.8,DW/O&O/W,reconstructed
60,600,0.9,DW/O&O/W,paper-table
85,100,0.2,ST,paper-table
85,100,0.4,ST,reconstructed
85,100,0.6,ST,reconstructed
85,100,0.8,ST,reconstructed
85,100,0.9,ST,paper-table
85,300,0.2,ST,reconstructed
85,300,0.4,DW/O&O/W,reconstructed
85,300,0.6,DW/O&O/W,reconstructed
85,300,0.8,DO/W&W,paper-table
85,300,0.9,DO/W&W,paper-table
85,600,0.2,W/O,reconstructed
85,600,0.4,W/O,reconstructed
85,600,0.6,W/O,paper-table
85,600,0.8,DW/O&O/W,reconstructed
85,600,0.9,DW/O&O/W,reconstructed
90,100,0.2,ST,reconstructed
90,100,0.4,ST,reconstructed
90,100,0.6,ST,reconstructed
90,100,0.8,ST,paper-table
90,100,0.9,ST,reconstructed
90,300,0.2,ST,reconstructed
90,300,0.4,DW/O&O/W,paper-table
90,300,0.6,DW/O&O/W,reconstructed
90,300,0.8,DO/W&W,reconstructed
90,300,0.9,DO/W&W,reconstructed
90,600,0.2,W/O,reconstructed
90,600,0.4,W/O,reconstructed
90,600,0.6,W/O,reconstructed
90,600,0.8,DW/O&O/W,paper-table
90,600,0.9,DW/O&O/W,reconstructed
"""


# ─────────────────────────────────────────
# CSV
# ─────────────────────────────────────────

def _number(raw: str, column: str, bounds: tuple[float, float], line: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DatasetError(f"{column} '{raw}' is not a number", line) from None
    if not math.isfinite(value):
        raise DatasetError(f"{column} must be finite, got '{raw}'", line)
    lo, hi = bounds
    if not lo <= value <= hi:
        raise DatasetError(f"{column}={value:g} outside [{lo:g}, {hi:g}]", line)
    return value


def parse_csv(text: str) -> list[ExperimentRecord]:
    """Parse dataset CSV text. Blank lines are skipped.

    Raises:
        DatasetError: bad header, unparseable number, unknown pattern label,
            unknown provenance or out-of-range value, with its line number.
    """
    text = text.lstrip("\ufeff")
    if not text.strip():
        raise DatasetError("missing header", 1)
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False,
                            skip_blank_lines=False, skipinitialspace=True)
    except pd.errors.ParserError as e:
        raise DatasetError(str(e).strip()) from e

    columns = tuple(c.strip() for c in frame.columns)
    if columns not in (CSV_COLUMNS, CSV_COLUMNS + (PROVENANCE_COLUMN,)):
        raise DatasetError(
            f"header must be '{','.join(CSV_COLUMNS)}' with an optional "
            f"'{PROVENANCE_COLUMN}' column, got '{','.join(columns)}'", 1,
        )
    frame.columns = columns
    frame = frame.fillna("")

    records = []
    for index, row in frame.iterrows():
        line = int(index) + 2
        cells = {c: str(row[c]).strip() for c in columns}
        if not any(cells.values()):
            continue
        angle = _number(cells["angle_deg"], "angle_deg", ANGLE_RANGE, line)
        flow = _number(cells["flow_m3d"], "flow_m3d", FLOW_RANGE, line)
        watercut = _number(cells["watercut_frac"], "watercut_frac", WATERCUT_RANGE, line)
        try:
            pattern = FlowPattern.from_label(cells["pattern"])
        except ValueError:
            raise DatasetError(f"unknown pattern label '{cells['pattern']}'", line) from None
        provenance = Provenance.RECONSTRUCTED
        if cells.get(PROVENANCE_COLUMN):
            try:
                provenance = Provenance(cells[PROVENANCE_COLUMN])
            except ValueError:
                raise DatasetError(
                    f"unknown provenance '{cells[PROVENANCE_COLUMN]}'", line) from None
        records.append(ExperimentRecord(angle, flow, watercut, pattern, provenance))
    return records


def _format_number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def serialize_csv(records: Sequence[ExperimentRecord]) -> str:
    """CSV text with the provenance column; parse_csv reads it back unchanged."""
    frame = pd.DataFrame(
        [
            (_format_number(r.angle), _format_number(r.flow), _format_number(r.watercut),
             r.pattern.label, r.provenance.value)
            for r in records
        ],
        columns=list(CSV_COLUMNS + (PROVENANCE_COLUMN,)),
    )
    return frame.to_csv(index=False, lineterminator="\n")


def read_csv_file(path: str) -> list[ExperimentRecord]:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_csv(f.read())


def embedded_dataset() -> list[ExperimentRecord]:
    """The 60-point design grid: 4 angles × 3 flows × 5 water cuts."""
    return parse_csv(_EMBEDDED_CSV)


# ─────────────────────────────────────────
# Splitting
# ─────────────────────────────────────────

@dataclass(frozen=True)
class SplitSpec:
    scheme: Literal["paper", "random"]
    fraction: float = 0.3
    seed: int = 0

    @classmethod
    def paper(cls) -> "SplitSpec":
        return cls("paper")

    @classmethod
    def seeded_random(cls, fraction: float, seed: int) -> "SplitSpec":
        return cls("random", fraction, seed)


def split(records: Sequence[ExperimentRecord], spec: SplitSpec
          ) -> tuple[list[ExperimentRecord], list[ExperimentRecord]]:
    """(train, test), each in the original record order.

    paper: test is every record sitting on one of the 18 published test
    points. random: round(fraction × n) records drawn by a seeded permutation.
    """
    records = list(records)
    if not records:
        raise SplitError("cannot split an empty dataset")

    if spec.scheme == "paper":
        canonical = {p[:3] for p in PAPER_TEST_POINTS}
        present = {r.coordinates for r in records}
        missing = sorted(canonical - present)
        if missing:
            raise SplitError(
                f"paper split needs all {len(canonical)} published test points; "
                f"missing {len(missing)}, e.g. {missing[0]}"
            )
        test = [r for r in records if r.coordinates in canonical]
        train = [r for r in records if r.coordinates not in canonical]
    elif spec.scheme == "random":
        n_test = round(spec.fraction * len(records))
        if n_test <= 0:
            raise SplitError(f"fraction {spec.fraction} leaves an empty test set")
        if n_test >= len(records):
            raise SplitError(f"fraction {spec.fraction} leaves an empty training set")
        chosen = set(np.random.default_rng(spec.seed).permutation(len(records))[:n_test].tolist())
        test = [r for i, r in enumerate(records) if i in chosen]
        train = [r for i, r in enumerate(records) if i not in chosen]
    else:
        raise SplitError(f"unknown split scheme '{spec.scheme}'")

    logger.debug("split %s: %d train / %d test", spec.scheme, len(train), len(test))
    return train, test


# ─────────────────────────────────────────
# Reconstruction sanity oracle
# ─────────────────────────────────────────

def _scaled(record: ExperimentRecord) -> np.ndarray:
    return np.array([
        (record.angle - ANGLE_RANGE[0]) / (ANGLE_RANGE[1] - ANGLE_RANGE[0]),
        (record.flow - FLOW_RANGE[0]) / (FLOW_RANGE[1] - FLOW_RANGE[0]),
        (record.watercut - WATERCUT_RANGE[0]) / (WATERCUT_RANGE[1] - WATERCUT_RANGE[0]),
    ])


def reconstruction_agreement(records: Sequence[ExperimentRecord]) -> dict:
    """Share of reconstructed records whose nearest paper-table record has the same label.

    Distances are Euclidean over the three inputs scaled to their universes;
    ties go to the earlier paper-table record.

    Returns:
        dict with compared, agreeing, agreement (None when nothing to compare),
        and disagreements (reconstructed coordinates, own label, neighbour label).
    """
    anchors = [r for r in records if r.provenance is Provenance.PAPER_TABLE]
    targets = [r for r in records if r.provenance is Provenance.RECONSTRUCTED]
    if not anchors or not targets:
        return {"compared": 0, "agreeing": 0, "agreement": None, "disagreements": []}

    anchor_xy = np.stack([_scaled(a) for a in anchors])
    agreeing = 0
    disagreements = []
    for record in targets:
        nearest = anchors[int(np.argmin(np.linalg.norm(anchor_xy - _scaled(record), axis=1)))]
        if nearest.pattern is record.pattern:
            agreeing += 1
        else:
            disagreements.append({
                "point": list(record.coordinates),
                "label": record.pattern.label,
                "neighbour": list(nearest.coordinates),
                "neighbour_label": nearest.pattern.label,
            })
    return {
        "compared": len(targets),
        "agreeing": agreeing,
        "agreement": agreeing / len(targets),
        "disagreements": disagreements,
    }


def find_record(records: Sequence[ExperimentRecord], angle: float, flow: float,
                watercut: float) -> Optional[ExperimentRecord]:
    for r in records:
        if r.coordinates == (angle, flow, watercut):
            return r
    return None


# --- Self-check ---
if __name__ == "__main__":
    print("=== Dataset Self-Check ===\n")

    records = embedded_dataset()

    print("Test 1: Embedded dataset shape")
    assert len(records) == 60
    paper = [r for r in records if r.provenance is Provenance.PAPER_TABLE]
    assert len(paper) == 18
    assert {(r.angle, r.flow, r.watercut, r.pattern) for r in paper} == set(PAPER_TEST_POINTS)
    print(f"  Records: {len(records)}, paper-table: {len(paper)}")
    print("  [OK]")

    print("\nTest 2: Paper split")
    train, test = split(records, SplitSpec.paper())
    assert (len(train), len(test)) == (42, 18)
    print("  [OK]")

    print("\nTest 3: CSV round trip and errors")
    assert parse_csv(serialize_csv(records)) == records
    try:
        parse_csv("angle_deg,flow_m3d,watercut_frac,pattern\n0,100,1.80,DO/W&W\n")
        raise AssertionError("expected DatasetError")
    except DatasetError as e:
        assert e.line == 2
        print(f"  {e}")
    print("  [OK]")

    print("\nTest 4: Regime constraints")
    assert not any(r.pattern is FlowPattern.ST for r in records if r.angle == 60)
    for angle in (85, 90):
        assert any(r.pattern is FlowPattern.ST for r in records
                   if r.angle == angle and r.flow == 100)
    print(f"  Nearest-neighbour agreement: {reconstruction_agreement(records)['agreement']:.2f}")
    print("  [OK]")

    print("\n=== All dataset checks passed ===")
