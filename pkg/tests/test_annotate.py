import ast
import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecgsynth.annotate import (
    METADATA_KEYS, PixelBox, SampleMetadata, YoloRecord, emit_metadata,
    emit_signals, emit_yolo_file, from_yolo, load_signals, name_class,
    parse_metadata, parse_yolo_file, to_yolo,
)
from ecgsynth.errors import (
    CountMismatch, DegenerateBox, NonFinite, ShapeMismatch,
)
from ecgsynth.geometry import CanvasSpec, compute_layout
from ecgsynth.ingest import LEAD_ORDER

SPEC = CanvasSpec()
LAYOUT = compute_layout(SPEC)


def page_records():
    regions = [to_yolo(PixelBox(*lead.region), 0, SPEC) for lead in LAYOUT.leads]
    names = [to_yolo(PixelBox(lead.name_anchor[0], lead.name_anchor[1], 27 * len(lead.name), 32),
                     name_class(lead.index), SPEC) for lead in LAYOUT.leads]
    return regions + names


def sample_metadata(**over):
    leads = [{"name": lead.name, "baseline_y": lead.baseline_y,
              "region_box": list(lead.region),
              "name_box": [lead.name_anchor[0], lead.name_anchor[1], 27, 32],
              "mu_mV": 0.01, "sigma_mV": 0.2, "clipped_samples": 0}
             for lead in LAYOUT.leads]
    base = dict(
        record_id="00001", split="train", generator_version="0.1.0", rng_seed=123,
        demographics={"age": 56.0, "sex": "female", "height": None, "weight": 63.0},
        scp_codes={"NORM": 100.0}, superclasses=["NORM"],
        quality={"baseline_drift_level": 0, "static_noise_level": 1},
        sampling_rate_hz=500.0, duration_s=10.0, n_samples=5000,
        lead_order=list(LEAD_ORDER), amplitude_units="z",
        paper_speed_mm_s=25, voltage_scale_mm_mV=10, grid_visible=False,
        grid_color="green", grid_opacity=0.8, stroke_width_px=2.345678,
        px_per_mm=8.444, px_per_sec=211.1, px_per_mV=84.44,
        canvas={"dpi": 300, "width_px": 2481, "height_px": 3507,
                "margin_top": 100, "margin_bottom": 100, "margin_left": 150,
                "margin_right": 150, "lead_gap_px": 30, "pulse_slot_px": 70},
        clipped_sample_count=0, invalid_sample_count=0,
        header_box=[558, 32, 1364, 36], leads=leads)
    base.update(over)
    return SampleMetadata(**base)


# ----------------------------------------------------------------- yolo

def test_region_box_example():
    rec = to_yolo(PixelBox(150, 100, 2181, 248), 0, SPEC)
    assert rec.line() == "0 0.500000 0.063872 0.879081 0.070716"


def test_full_canvas():
    rec = to_yolo(PixelBox(0, 0, 2481, 3507), 0, SPEC)
    assert (rec.x_center, rec.y_center, rec.width, rec.height) == (0.5, 0.5, 1.0, 1.0)


@pytest.mark.parametrize("box", [PixelBox(0, 0, 0, 10), PixelBox(0, 0, 5, -1)])
def test_degenerate(box):
    with pytest.raises(DegenerateBox):
        to_yolo(box, 0, SPEC)


def test_outside_canvas_rejected():
    with pytest.raises(ValueError):
        to_yolo(PixelBox(2400, 0, 200, 10), 0, SPEC)


def test_tiny_overshoot_is_clamped():
    rec = to_yolo(PixelBox(0, 0, 2481 * (1 + 1e-12), 10), 0, SPEC)
    assert rec.width == 1.0


def test_name_classes():
    assert [name_class(i) for i in range(12)] == list(range(1, 13))


def test_page_file_format():
    recs = page_records()
    # region records carry no lead index, so callers pass them in lead order
    text = emit_yolo_file(recs[:12] + recs[:11:-1])
    lines = text.splitlines()
    assert text.endswith("\n") and len(lines) == 24
    assert [int(l.split()[0]) for l in lines] == [0] * 12 + list(range(1, 13))
    for line in lines:
        fields = line.split()
        assert len(fields) == 5
        for f in fields[1:]:
            assert len(f.split(".")[1]) == 6 and 0 <= float(f) <= 1
    # region lines keep lead order
    ys = [float(l.split()[2]) for l in lines[:12]]
    assert ys == sorted(ys)


def test_count_mismatch():
    with pytest.raises(CountMismatch):
        emit_yolo_file(page_records()[:-1])
    recs = page_records()
    recs[-1] = YoloRecord(3, 0.5, 0.5, 0.1, 0.1)
    with pytest.raises(CountMismatch):
        emit_yolo_file(recs)


def test_parse_round_trip():
    recs = page_records()
    back = parse_yolo_file(emit_yolo_file(recs))
    for a, b in zip(recs, back):
        assert a.class_id == b.class_id
        assert abs(a.x_center - b.x_center) <= 5e-7


boxes = st.builds(lambda x, y, w, h: PixelBox(x, y, min(w, 2481 - x), min(h, 3507 - y)),
                  st.integers(0, 2400), st.integers(0, 3400),
                  st.integers(1, 2481), st.integers(1, 3507))


@given(boxes)
def test_denormalize_within_half_pixel(box):
    rec = parse_yolo_file(to_yolo(box, 0, SPEC).line())[0]
    back = from_yolo(rec, SPEC)
    for a, b in zip(back.as_list(), box.as_list()):
        assert abs(a - b) <= 0.5


@given(boxes)
def test_coordinates_in_unit_interval(box):
    rec = to_yolo(box, 0, SPEC)
    assert all(0 <= v <= 1 for v in (rec.x_center, rec.y_center, rec.width, rec.height))


# ----------------------------------------------------------------- npy

def test_npy_layout(rng):
    arr = rng.normal(size=(12, 5000))
    data = emit_signals(arr)
    assert len(data) == 128 + 480_000
    assert data[:6] == b"\x93NUMPY"
    assert data[6:8] == b"\x01\x00"
    (hlen,) = struct.unpack("<H", data[8:10])
    assert 10 + hlen == 128
    header = ast.literal_eval(data[10:10 + hlen].decode("ascii"))
    assert header == {"descr": "<f8", "fortran_order": False, "shape": (12, 5000)}
    payload = np.frombuffer(data[128:], dtype="<f8").reshape(12, 5000)
    np.testing.assert_array_equal(payload, arr)
    np.testing.assert_array_equal(load_signals(data), arr)


def test_zero_payload():
    data = emit_signals(np.zeros((12, 5000)))
    assert set(data[128:]) == {0}


def test_npy_errors():
    with pytest.raises(ShapeMismatch):
        emit_signals(np.zeros((12, 4999)))
    bad = np.zeros((12, 5000))
    bad[0, 0] = np.inf
    with pytest.raises(NonFinite):
        emit_signals(bad)


# ----------------------------------------------------------------- metadata

def test_metadata_round_trip():
    meta = sample_metadata()
    assert parse_metadata(emit_metadata(meta)) == meta


def test_metadata_keeps_grid_color_when_hidden():
    text = emit_metadata(sample_metadata(grid_visible=False))
    doc = json.loads(text)
    assert doc["grid_visible"] is False and doc["grid_color"] == "green"
    assert '"grid_visible": false' in text


def test_metadata_key_order_and_counts():
    doc = json.loads(emit_metadata(sample_metadata()))
    assert tuple(doc) == METADATA_KEYS
    meta = sample_metadata()
    assert len(meta.region_boxes()) == 12 and len(meta.name_boxes()) == 12
    assert meta.canvas_spec() == SPEC


def test_metadata_rejects_nonfinite_and_short_leads():
    with pytest.raises(NonFinite):
        emit_metadata(sample_metadata(px_per_mm=float("nan")))
    meta = sample_metadata()
    with pytest.raises(CountMismatch):
        emit_metadata(sample_metadata(leads=meta.leads[:11]))


def test_metadata_unknown_key():
    doc = json.loads(emit_metadata(sample_metadata()))
    doc["extra"] = 1
    with pytest.raises(ValueError):
        parse_metadata(json.dumps(doc))
