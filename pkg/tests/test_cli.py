"""End-to-end tests of the command-line surface at small scale."""

import json

import numpy as np
import pytest

import gridgaze
from gridgaze import formats, model
from gridgaze.cli import main
from gridgaze.grid import GridSpec


def _run(argv, capsys=None):
    code = main(argv)
    if code != 0 and capsys is not None:
        raise AssertionError(f"{argv} failed: {capsys.readouterr().err}")
    assert code == 0, f"{argv} exited {code}"


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """Small generated dataset plus a trained checkpoint and predictions."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    _run(["gen", "--out", str(data), "--seed", "3", "--count", "12",
          "--val-count", "6"])
    ckpt = root / "model.gzh"
    _run(["train", "--data", str(data / "manifest.json"), "--out", str(ckpt),
          "--grid", "4x4", "--epochs", "2", "--batch", "8"])
    preds = root / "preds"
    _run(["predict", "--data", str(data / "manifest.json"), "--ckpt",
          str(ckpt), "--out", str(preds)])
    return root


def test_gen_layout_and_manifest(workspace):
    data = workspace / "data"
    manifest = formats.load_manifest(data / "manifest.json")
    assert manifest.feature_dims == (8, 12, 20)
    assert (manifest.frame_height, manifest.frame_width) == (288, 512)
    assert len(manifest.split_records("train")) == 12
    assert len(manifest.split_records("val")) == 6
    rec = manifest.records[0]
    f, g, d = rec.resolve(data)
    assert formats.load_tensor(f).shape == (8, 12, 20)
    assert formats.load_map(g).shape == (288, 512)
    assert rec.frame_id in formats.load_detections(d)


def test_gen_deterministic_artifacts(workspace, tmp_path):
    again = tmp_path / "again"
    _run(["gen", "--out", str(again), "--seed", "3", "--count", "12",
          "--val-count", "6"])
    data = workspace / "data"
    assert ((again / "manifest.json").read_bytes()
            == (data / "manifest.json").read_bytes())
    for rel in ("maps/frame_000000.smf", "features/frame_000005.ftn",
                "detections/frame_000013.ndjson"):
        assert (again / rel).read_bytes() == (data / rel).read_bytes()


def test_gen_timestamps_only_in_sidecar_log(workspace):
    assert (workspace / "data" / "gen.log").exists()


def test_train_outputs(workspace):
    ckpt = workspace / "model.gzh"
    params = formats.load_checkpoint(ckpt)
    assert params.grid == GridSpec(4, 4)
    assert (params.in_channels, params.in_height, params.in_width) == (8, 12, 20)
    history = (workspace / "model.gzh.history.csv").read_text().splitlines()
    assert history[0] == "epoch,lr,loss"
    assert len(history) == 3
    assert (workspace / "model.gzh.log").exists()


def test_train_deterministic_checkpoint(workspace, tmp_path):
    data = workspace / "data"
    other = tmp_path / "model2.gzh"
    _run(["train", "--data", str(data / "manifest.json"), "--out", str(other),
          "--grid", "4x4", "--epochs", "2", "--batch", "8"])
    assert other.read_bytes() == (workspace / "model.gzh").read_bytes()
    assert (tmp_path / "model2.gzh.history.csv").read_bytes() == \
        (workspace / "model.gzh.history.csv").read_bytes()


def test_predict_outputs(workspace):
    manifest = formats.load_manifest(workspace / "data" / "manifest.json")
    for rec in manifest.split_records("val"):
        m = formats.load_map(workspace / "preds" / f"{rec.frame_id}.smf")
        assert m.shape == (288, 512)
        assert np.all(m >= 0.0)


def test_eval_self_evaluation_is_perfect(workspace, tmp_path, capsys):
    data = workspace / "data"
    out = tmp_path / "metrics.json"
    _run(["eval", "--data", str(data / "manifest.json"), "--maps",
          str(data / "maps"), "--out", str(out)], capsys)
    report = formats.load_metrics_json(out)
    assert abs(report["kl"]) < 1e-9
    assert report["cc"] > 0.999999
    assert report["auc"] == 1.0
    assert report["threshold"] == 0.5


def test_eval_on_predictions(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "metrics.json"
    _run(["eval", "--data", str(data / "manifest.json"), "--maps",
          str(workspace / "preds"), "--out", str(out)])
    report = formats.load_metrics_json(out)
    assert list(json.loads(out.read_text())) == list(formats.METRIC_FIELDS)
    assert report["tp"] + report["fp"] + report["tn"] + report["fn"] > 0
    frames = (tmp_path / "metrics_frames.csv").read_text().splitlines()
    assert frames[0] == "frame_id,kl,cc,boxes,focused_gt"
    assert len(frames) == 7


def test_map_threshold_one_focuses_nothing(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "focus.ndjson"
    _run(["map", "--data", str(data / "manifest.json"), "--maps",
          str(data / "maps"), "--th", "1.0", "--out", str(out)])
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(lines) == 6
    assert all(not box["focused"] for rec in lines for box in rec["boxes"])


def test_map_default_threshold(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "focus.ndjson"
    _run(["map", "--data", str(data / "manifest.json"), "--maps",
          str(workspace / "preds"), "--out", str(out)])
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert {rec["threshold"] for rec in lines} == {0.5}
    for rec in lines:
        for box in rec["boxes"]:
            assert 0.0 <= box["focus_probability"] <= 1.0
            assert box["focused"] == (box["focus_probability"] > 0.5)


def test_roc_outputs_and_determinism(workspace, tmp_path):
    data = workspace / "data"
    a, tha = tmp_path / "a.csv", tmp_path / "a_th.txt"
    b, thb = tmp_path / "b.csv", tmp_path / "b_th.txt"
    for out, th in ((a, tha), (b, thb)):
        _run(["roc", "--data", str(data / "manifest.json"), "--maps",
              str(workspace / "preds"), "--out", str(out),
              "--th-out", str(th)])
    assert a.read_bytes() == b.read_bytes()
    assert tha.read_bytes() == thb.read_bytes()
    chosen = float(tha.read_text())
    assert 0.0 <= chosen <= 1.0
    header = a.read_text().splitlines()[0]
    assert header == "threshold,tpr,fpr"


def test_roc_distance_rule_runs(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "roc.csv"
    _run(["roc", "--data", str(data / "manifest.json"), "--maps",
          str(workspace / "preds"), "--rule", "distance", "--out", str(out)])
    assert out.exists()


def test_baseline_and_expand(workspace, tmp_path):
    data = workspace / "data"
    base_map = tmp_path / "baseline.smf"
    expand = tmp_path / "base_preds"
    _run(["baseline", "--data", str(data / "manifest.json"), "--out",
          str(base_map), "--expand", str(expand)])
    mean = formats.load_map(base_map)
    assert mean.shape == (288, 512)
    copies = sorted(expand.glob("*.smf"))
    assert len(copies) == 6
    assert copies[0].read_bytes() == base_map.read_bytes()


def test_baseline_feeds_eval(workspace, tmp_path):
    data = workspace / "data"
    expand = tmp_path / "base_preds"
    _run(["baseline", "--data", str(data / "manifest.json"), "--out",
          str(tmp_path / "baseline.smf"), "--expand", str(expand)])
    out = tmp_path / "metrics.json"
    _run(["eval", "--data", str(data / "manifest.json"), "--maps",
          str(expand), "--out", str(out)])
    report = formats.load_metrics_json(out)
    assert 0.0 <= report["auc"] <= 1.0


def test_encode_decode_round_trip(workspace, tmp_path):
    src = workspace / "data" / "maps" / "frame_000012.smf"
    vec = tmp_path / "vec.json"
    _run(["encode", "--map", str(src), "--grid", "4x4", "--out", str(vec)])
    doc = json.loads(vec.read_text())
    assert doc["grid"] == "4x4"
    assert len(doc["vector"]) == 16
    assert set(doc["vector"]) <= {0, 1}
    rec = tmp_path / "rec.smf"
    _run(["decode", "--vector", str(vec), "--size", "288x512", "--out",
          str(rec)])
    assert formats.load_map(rec).shape == (288, 512)


def test_encode_stdout_mode(workspace, capsys):
    src = workspace / "data" / "maps" / "frame_000000.smf"
    _run(["encode", "--map", str(src), "--grid", "2x2"], capsys)
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert len(doc["vector"]) == 4


def test_info_output(workspace, capsys):
    _run(["info", "--ckpt", str(workspace / "model.gzh")], capsys)
    out = dict(line.split(" ", 1)
               for line in capsys.readouterr().out.strip().splitlines())
    assert out["channels"] == "8"
    assert out["height"] == "12"
    assert out["width"] == "20"
    assert out["grid"] == "4x4"
    assert int(out["params"]) == model.count_params(8, 12, 20, GridSpec(4, 4))
    assert out["backend"] == gridgaze.BACKEND


def test_error_line_on_corrupt_file(tmp_path, capsys):
    bad = tmp_path / "bad.smf"
    bad.write_bytes(b"SMF1 2 2\n" + b"\x00" * 12)
    code = main(["encode", "--map", str(bad)])
    err = capsys.readouterr().err
    assert code == 1
    assert err.startswith("error: TruncatedPayloadError:")


def test_error_line_on_bad_checkpoint(tmp_path, capsys):
    bad = tmp_path / "bad.gzh"
    bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
    code = main(["info", "--ckpt", str(bad)])
    err = capsys.readouterr().err
    assert code == 1
    assert err.startswith("error: MalformedHeaderError:")


def test_usage_error_exit_code(capsys):
    code = main(["frobnicate"])
    assert code == 2
    assert "No such command" in capsys.readouterr().err


def test_predict_checkpoint_dims_must_match(workspace, tmp_path, capsys):
    params = model.init_params(3, 4, 4, GridSpec(2, 2), seed=0)
    wrong = tmp_path / "wrong.gzh"
    formats.save_checkpoint(wrong, params)
    code = main(["predict", "--data",
                 str(workspace / "data" / "manifest.json"),
                 "--ckpt", str(wrong), "--out", str(tmp_path / "p")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
