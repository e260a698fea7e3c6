"""Tests for the binary map/tensor/checkpoint formats and JSON sidecars."""

import json
import struct

import numpy as np
import pytest

from gridgaze import formats, model
from gridgaze.errors import (
    DimensionMismatchError,
    InvalidBoxError,
    MalformedHeaderError,
    ManifestError,
    NegativeValueError,
    ParseError,
    TruncatedPayloadError,
)
from gridgaze.grid import GridSpec
from gridgaze.mapping import BoundingBox, DetectionSet


def test_map_round_trip_exact_at_f32(tmp_path):
    rng = np.random.default_rng(1)
    m = rng.random((7, 11)).astype(np.float32).astype(np.float64)
    path = tmp_path / "m.smf"
    formats.save_map(path, m)
    assert np.array_equal(formats.load_map(path), m)


def test_map_round_trip_rounds_to_f32(tmp_path):
    m = np.array([[1.0 / 3.0]])
    path = tmp_path / "m.smf"
    formats.save_map(path, m)
    assert formats.load_map(path)[0, 0] == np.float32(1.0 / 3.0)


def test_map_golden_bytes(tmp_path):
    m = np.array([[0.0, 0.5], [1.0, 0.25]])
    path = tmp_path / "m.smf"
    formats.save_map(path, m)
    expected = b"SMF1 2 2\n" + struct.pack("<4f", 0.0, 0.5, 1.0, 0.25)
    assert path.read_bytes() == expected


def test_map_header_width_first(tmp_path):
    path = tmp_path / "m.smf"
    formats.save_map(path, np.zeros((3, 5)))
    assert path.read_bytes().startswith(b"SMF1 5 3\n")
    assert formats.load_map(path).shape == (3, 5)


def test_map_truncated_payload(tmp_path):
    path = tmp_path / "m.smf"
    path.write_bytes(b"SMF1 2 2\n" + struct.pack("<3f", 0.0, 0.5, 1.0))
    with pytest.raises(TruncatedPayloadError):
        formats.load_map(path)


def test_map_trailing_bytes(tmp_path):
    path = tmp_path / "m.smf"
    path.write_bytes(b"SMF1 2 2\n" + struct.pack("<5f", 0, 0.5, 1, 0.25, 9))
    with pytest.raises(TruncatedPayloadError):
        formats.load_map(path)


@pytest.mark.parametrize("header", [
    b"XXXX 2 2\n",
    b"SMF1 2\n",
    b"SMF1 2 2 2\n",
    b"SMF1 a 2\n",
    b"SMF1 0 2\n",
    b"SMF1 -1 2\n",
])
def test_map_malformed_headers(tmp_path, header):
    path = tmp_path / "m.smf"
    path.write_bytes(header + struct.pack("<4f", 0, 0, 0, 0))
    with pytest.raises(MalformedHeaderError):
        formats.load_map(path)


def test_map_header_without_newline(tmp_path):
    path = tmp_path / "m.smf"
    path.write_bytes(b"SMF1 2 2" + b"\x00" * 200)
    with pytest.raises(MalformedHeaderError):
        formats.load_map(path)


def test_map_negative_payload(tmp_path):
    path = tmp_path / "m.smf"
    path.write_bytes(b"SMF1 2 1\n" + struct.pack("<2f", 0.5, -1.0))
    with pytest.raises(NegativeValueError):
        formats.load_map(path)


def test_map_non_finite_payload(tmp_path):
    path = tmp_path / "m.smf"
    path.write_bytes(b"SMF1 2 1\n" + struct.pack("<2f", 0.5, float("nan")))
    with pytest.raises(NegativeValueError):
        formats.load_map(path)


def test_tensor_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    t = rng.random((2, 3, 4)).astype(np.float32).astype(np.float64)
    path = tmp_path / "t.ftn"
    formats.save_tensor(path, t)
    assert np.array_equal(formats.load_tensor(path), t)


def test_tensor_golden_bytes(tmp_path):
    t = np.array([[[1.0, 0.5], [0.25, 0.0]]])
    path = tmp_path / "t.ftn"
    formats.save_tensor(path, t)
    expected = b"FTN1 1 2 2\n" + struct.pack("<4f", 1.0, 0.5, 0.25, 0.0)
    assert path.read_bytes() == expected


def test_tensor_dims_vs_payload_mismatch(tmp_path):
    path = tmp_path / "t.ftn"
    path.write_bytes(b"FTN1 1 2 2\n" + struct.pack("<3f", 1, 2, 3))
    with pytest.raises(TruncatedPayloadError):
        formats.load_tensor(path)


def test_tensor_save_validation(tmp_path):
    with pytest.raises(DimensionMismatchError):
        formats.save_tensor(tmp_path / "t.ftn", np.zeros((2, 2)))
    with pytest.raises(NegativeValueError):
        formats.save_tensor(tmp_path / "t.ftn", -np.ones((1, 2, 2)))


def test_map_loader_rejects_tensor_file(tmp_path):
    path = tmp_path / "t.ftn"
    formats.save_tensor(path, np.zeros((1, 2, 2)))
    with pytest.raises(MalformedHeaderError):
        formats.load_map(path)


def test_checkpoint_round_trip_bitwise(tmp_path):
    params = model.init_params(3, 5, 7, GridSpec(2, 3), seed=9)
    path = tmp_path / "m.gzh"
    formats.save_checkpoint(path, params)
    loaded = formats.load_checkpoint(path)
    assert (loaded.in_channels, loaded.in_height, loaded.in_width) == (3, 5, 7)
    assert loaded.grid == GridSpec(2, 3)
    for a, b in zip(params.arrays(), loaded.arrays()):
        assert np.array_equal(a, b)


def test_checkpoint_golden_layout(tmp_path):
    params = model.init_params(1, 2, 2, GridSpec(1, 1), seed=0)
    path = tmp_path / "m.gzh"
    formats.save_checkpoint(path, params)
    expected = (b"GZH1"
                + np.array([1, 2, 2, 1, 1], dtype="<u4").tobytes()
                + b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                           for a in params.arrays()))
    assert path.read_bytes() == expected
    assert len(expected) == 4 + 20 + 8 * 49


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "m.gzh"
    path.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(MalformedHeaderError):
        formats.load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    params = model.init_params(1, 2, 2, GridSpec(1, 1), seed=0)
    path = tmp_path / "m.gzh"
    formats.save_checkpoint(path, params)
    good = path.read_bytes()
    path.write_bytes(good[:-8])
    with pytest.raises(TruncatedPayloadError):
        formats.load_checkpoint(path)
    path.write_bytes(good + b"\x00" * 8)
    with pytest.raises(TruncatedPayloadError):
        formats.load_checkpoint(path)


def test_detections_empty_file(tmp_path):
    path = tmp_path / "d.ndjson"
    path.write_text("")
    assert formats.load_detections(path) == {}


def test_detections_one_line_exact_fields(tmp_path):
    path = tmp_path / "d.ndjson"
    path.write_text(json.dumps({
        "frame_id": "f7", "class_id": 2, "confidence": 0.75,
        "x_min": 1.5, "y_min": 2.0, "x_max": 10.25, "y_max": 12.0,
    }) + "\n")
    out = formats.load_detections(path)
    assert list(out) == ["f7"]
    box = out["f7"].boxes[0]
    assert box.class_id == 2
    assert box.confidence == 0.75
    assert (box.x_min, box.y_min, box.x_max, box.y_max) == (1.5, 2.0, 10.25, 12.0)


def test_detections_round_trip_and_grouping(tmp_path):
    sets = [
        DetectionSet(frame_id="a", boxes=(
            BoundingBox(0.0, 0.0, 4.0, 4.0, class_id=1, confidence=0.5),
            BoundingBox(1.0, 1.0, 2.0, 3.0, class_id=0, confidence=1.0))),
        DetectionSet(frame_id="b", boxes=(
            BoundingBox(5.0, 5.0, 9.0, 9.0, class_id=3, confidence=0.9),)),
    ]
    path = tmp_path / "d.ndjson"
    formats.save_detections(path, sets)
    out = formats.load_detections(path)
    assert list(out) == ["a", "b"]
    assert out["a"] == sets[0]
    assert out["b"] == sets[1]


def test_detections_interleaved_frames_preserve_order(tmp_path):
    lines = [
        {"frame_id": "a", "class_id": 0, "confidence": 1.0,
         "x_min": 0.0, "y_min": 0.0, "x_max": 1.0, "y_max": 1.0},
        {"frame_id": "b", "class_id": 1, "confidence": 1.0,
         "x_min": 0.0, "y_min": 0.0, "x_max": 2.0, "y_max": 2.0},
        {"frame_id": "a", "class_id": 2, "confidence": 1.0,
         "x_min": 0.0, "y_min": 0.0, "x_max": 3.0, "y_max": 3.0},
    ]
    path = tmp_path / "d.ndjson"
    path.write_text("".join(json.dumps(o) + "\n" for o in lines))
    out = formats.load_detections(path)
    assert list(out) == ["a", "b"]
    assert [b.class_id for b in out["a"].boxes] == [0, 2]


def test_detections_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "d.ndjson"
    good = json.dumps({"frame_id": "a", "class_id": 0, "confidence": 1.0,
                       "x_min": 0.0, "y_min": 0.0, "x_max": 1.0, "y_max": 1.0})
    path.write_text(good + "\n{broken\n")
    with pytest.raises(ParseError) as err:
        formats.load_detections(path)
    assert "line 2" in str(err.value)
    assert err.value.line == 2


def test_detections_missing_field(tmp_path):
    path = tmp_path / "d.ndjson"
    path.write_text(json.dumps({"frame_id": "a", "class_id": 0}) + "\n")
    with pytest.raises(ParseError) as err:
        formats.load_detections(path)
    assert "confidence" in str(err.value)


def test_detections_invalid_box_at_line(tmp_path):
    path = tmp_path / "d.ndjson"
    path.write_text(json.dumps({
        "frame_id": "a", "class_id": 0, "confidence": 1.0,
        "x_min": 5.0, "y_min": 0.0, "x_max": 1.0, "y_max": 1.0,
    }) + "\n")
    with pytest.raises(InvalidBoxError) as err:
        formats.load_detections(path)
    assert "line 1" in str(err.value)


def _record(fid, split="train"):
    return formats.SampleRecord(
        frame_id=fid, feature_path=f"features/{fid}.ftn",
        gt_map_path=f"maps/{fid}.smf",
        detections_path=f"detections/{fid}.ndjson", split=split)


def test_manifest_round_trip(tmp_path):
    manifest = formats.DatasetManifest(
        feature_dims=(8, 12, 20), frame_height=288, frame_width=512,
        records=(_record("f0"), _record("f1", "val")))
    path = tmp_path / "manifest.json"
    formats.save_manifest(path, manifest)
    assert formats.load_manifest(path) == manifest


def test_manifest_split_records():
    manifest = formats.DatasetManifest(
        feature_dims=(8, 12, 20), frame_height=288, frame_width=512,
        records=(_record("f0"), _record("f1", "val"), _record("f2")))
    assert [r.frame_id for r in manifest.split_records("train")] == ["f0", "f2"]
    assert [r.frame_id for r in manifest.split_records("val")] == ["f1"]
    assert manifest.split_records("test") == ()


def test_manifest_duplicate_frame_id():
    with pytest.raises(ManifestError):
        formats.DatasetManifest(
            feature_dims=(8, 12, 20), frame_height=288, frame_width=512,
            records=(_record("f0"), _record("f0", "val")))


def test_sample_record_validation():
    with pytest.raises(ManifestError):
        _record("")
    with pytest.raises(ManifestError):
        _record("f0", split="holdout")
    with pytest.raises(ManifestError):
        formats.SampleRecord(frame_id="f0", feature_path="",
                             gt_map_path="m.smf",
                             detections_path="d.ndjson", split="train")


def test_record_resolve_joins_base():
    rec = _record("f0")
    f, g, d = rec.resolve("/data/run")
    assert str(f) == "/data/run/features/f0.ftn"
    assert str(g) == "/data/run/maps/f0.smf"
    assert str(d) == "/data/run/detections/f0.ndjson"


def test_metrics_json_round_trip_and_order(tmp_path):
    values = {"kl": 1.15, "cc": 0.6, "auc": 0.85, "precision": 0.7,
              "recall": 0.8, "f1": 0.75, "accuracy": 0.9, "tp": 10,
              "fp": 3, "tn": 20, "fn": 2, "threshold": 0.5}
    path = tmp_path / "metrics.json"
    formats.save_metrics_json(path, values)
    assert formats.load_metrics_json(path) == values
    keys = list(json.loads(path.read_text()))
    assert keys == list(formats.METRIC_FIELDS)


def test_metrics_json_missing_field(tmp_path):
    with pytest.raises(ManifestError):
        formats.save_metrics_json(tmp_path / "m.json", {"kl": 1.0})


def test_metrics_json_deterministic_bytes(tmp_path):
    values = dict(zip(formats.METRIC_FIELDS, np.linspace(0, 1, 12)))
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    formats.save_metrics_json(a, values)
    formats.save_metrics_json(b, values)
    assert a.read_bytes() == b.read_bytes()


def test_save_csv_repr_floats(tmp_path):
    path = tmp_path / "t.csv"
    formats.save_csv(path, ("a", "b"), [(1, 0.1), (2, 1.0 / 3.0)])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1] == "1,0.1"
    assert lines[2] == f"2,{1.0 / 3.0!r}"
