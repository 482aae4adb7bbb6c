import itertools

import pytest
from hypothesis import given, strategies as st

from tools.dataset import (
    DESIGN_ANGLES,
    DESIGN_FLOWS,
    DESIGN_WATERCUTS,
    FLUID_PROPERTIES,
    PAPER_TEST_POINTS,
    DatasetError,
    ExperimentRecord,
    FluidProperties,
    Provenance,
    SplitError,
    SplitSpec,
    embedded_dataset,
    find_record,
    parse_csv,
    read_csv_file,
    reconstruction_agreement,
    serialize_csv,
    split,
)
from tools.knowledge_base import FlowPattern

HEADER = "angle_deg,flow_m3d,watercut_frac,pattern\n"


def test_embedded_dataset_covers_design_grid(records):
    assert len(records) == 60
    coordinates = [r.coordinates for r in records]
    assert len(set(coordinates)) == 60
    assert set(coordinates) == set(itertools.product(DESIGN_ANGLES, DESIGN_FLOWS, DESIGN_WATERCUTS))


def test_paper_table_rows_match_published_points(records):
    paper = [r for r in records if r.provenance is Provenance.PAPER_TABLE]
    assert len(paper) == 18
    assert {(r.angle, r.flow, r.watercut, r.pattern) for r in paper} == set(PAPER_TEST_POINTS)


def test_regime_constraints(records):
    assert not any(r.pattern is FlowPattern.ST for r in records if r.angle == 60)
    for angle in (85, 90):
        assert any(r.pattern is FlowPattern.ST for r in records if r.angle == angle and r.flow == 100)


def test_paper_split(records, paper_split):
    train, test = paper_split
    assert (len(train), len(test)) == (42, 18)
    assert {r.coordinates for r in test} == {p[:3] for p in PAPER_TEST_POINTS}
    assert not {r.coordinates for r in train} & {r.coordinates for r in test}
    assert test == [r for r in records if r in test]


def test_paper_split_needs_every_published_point(records):
    with pytest.raises(SplitError, match="missing 1"):
        split([r for r in records if r.coordinates != (0.0, 100.0, 0.8)], SplitSpec.paper())


def test_random_split_is_seeded(records):
    first = split(records, SplitSpec.seeded_random(0.3, 7))
    assert split(records, SplitSpec.seeded_random(0.3, 7)) == first
    assert len(first[1]) == 18
    assert split(records, SplitSpec.seeded_random(0.3, 8)) != first


@given(st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_random_split_partitions(fraction, seed):
    records = embedded_dataset()
    train, test = split(records, SplitSpec.seeded_random(fraction, seed))
    assert len(test) == round(fraction * 60)
    assert sorted(train + test, key=records.index) == records
    assert train == [r for r in records if r in train]


@pytest.mark.parametrize("records, spec", [
    ([], SplitSpec.paper()),
    (None, SplitSpec.seeded_random(0.001, 0)),
    (None, SplitSpec.seeded_random(0.999, 0)),
])
def test_split_errors(records, spec):
    with pytest.raises(SplitError):
        split(embedded_dataset() if records is None else records, spec)


# ─────────────────────────────────────────
# CSV
# ─────────────────────────────────────────

def test_serialize_round_trip(records, tmp_path):
    text = serialize_csv(records)
    assert text.splitlines()[0] == "angle_deg,flow_m3d,watercut_frac,pattern,provenance"
    assert parse_csv(text) == records
    path = tmp_path / "data.csv"
    path.write_text(text, encoding="utf-8")
    assert read_csv_file(str(path)) == records


def test_minimal_csv_defaults_to_reconstructed():
    rows = parse_csv(HEADER + "0,100,0.8,DO/W&W\n45.5,350,0.25,w/o\n")
    assert rows == [
        ExperimentRecord(0.0, 100.0, 0.8, FlowPattern.DOW),
        ExperimentRecord(45.5, 350.0, 0.25, FlowPattern.WO),
    ]
    assert all(r.provenance is Provenance.RECONSTRUCTED for r in rows)


def test_crlf_bom_and_blank_lines():
    text = "\ufeff" + HEADER.replace("\n", "\r\n") + "0,100,0.8,DO/W&W\r\n\r\n90,600,0.9,DW/O&O/W\r\n"
    assert [r.pattern for r in parse_csv(text)] == [FlowPattern.DOW, FlowPattern.DWO]


@pytest.mark.parametrize("body, line, fragment", [
    ("0,100,1.80,DO/W&W\n", 2, "watercut_frac=1.8 outside [0, 1]"),
    ("0,100,0.8,DO/W&W\n91,100,0.8,ST\n", 3, "angle_deg=91 outside [0, 90]"),
    ("0,abc,0.8,ST\n", 2, "flow_m3d 'abc' is not a number"),
    ("0,100,0.8,SLUG\n", 2, "unknown pattern label 'SLUG'"),
    ("0,100,nan,ST\n", 2, "must be finite"),
])
def test_bad_rows_report_line(body, line, fragment):
    with pytest.raises(DatasetError) as excinfo:
        parse_csv(HEADER + body)
    assert excinfo.value.line == line
    assert fragment in str(excinfo.value)
    assert str(excinfo.value).startswith(f"line {line}: ")


def test_bad_header_and_provenance():
    with pytest.raises(DatasetError) as excinfo:
        parse_csv("angle,flow,wc,pattern\n0,100,0.8,ST\n")
    assert excinfo.value.line == 1
    with pytest.raises(DatasetError, match="unknown provenance"):
        parse_csv(HEADER.rstrip("\n") + ",provenance\n0,100,0.8,ST,measured\n")
    with pytest.raises(DatasetError, match="missing header"):
        parse_csv("")


# ─────────────────────────────────────────
# Helpers
# ─────────────────────────────────────────

def test_reconstruction_agreement(records):
    result = reconstruction_agreement(records)
    assert result["compared"] == 42
    assert result["agreeing"] + len(result["disagreements"]) == 42
    assert 0.0 <= result["agreement"] <= 1.0

    only_paper = [r for r in records if r.provenance is Provenance.PAPER_TABLE]
    assert reconstruction_agreement(only_paper)["agreement"] is None


def test_find_record(records):
    assert find_record(records, 0.0, 100.0, 0.8).pattern is FlowPattern.DOW
    assert find_record(records, 1.0, 100.0, 0.8) is None


def test_fluid_properties():
    assert FLUID_PROPERTIES.to_dict()["pipe_inner_diameter_mm"] == 159.0
    with pytest.raises(ValueError):
        FluidProperties(oil_density_g_cm3=0.0)
