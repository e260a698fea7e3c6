"""Command-line surface: gen, train, predict, map, eval, roc, baseline,
encode, decode, info.

All artifacts are deterministic for fixed flags and seeds; wall-clock
timestamps only ever go to .log sidecar files. Dimension flags are
ROWSxCOLS (height first); every module error exits 1 with a single
"error: <Type>: <message>" line on stderr.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from gridgaze import formats, mapping, metrics, model, saliency, synthetic
from gridgaze.backend import BACKEND
from gridgaze.errors import InconsistentDimsError, PipelineError
from gridgaze.grid import GridSpec


class GridType(click.ParamType):
    name = "rowsxcols"

    def convert(self, value, param, ctx):
        if isinstance(value, GridSpec):
            return value
        try:
            return GridSpec.parse(value)
        except (PipelineError, ValueError) as e:
            self.fail(str(e), param, ctx)


class DimsType(click.ParamType):
    name = "heightxwidth"

    def convert(self, value, param, ctx):
        try:
            h, w = (int(t) for t in str(value).lower().split("x"))
        except ValueError:
            self.fail(f"expected HEIGHTxWIDTH, got {value!r}", param, ctx)
        if h < 1 or w < 1:
            self.fail(f"dims must be >= 1, got {value!r}", param, ctx)
        return h, w


GRID = GridType()
DIMS = DimsType()


@click.group()
def cli():
    """Grid-based gaze prediction and focused-object mapping."""


def _log_sidecar(path: Path, lines) -> None:
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(path, "w", encoding="ascii") as f:
        f.write(f"started {stamp}\n")
        for line in lines:
            f.write(line + "\n")


# --- gen -----------------------------------------------------------------

@cli.command("gen")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", "train_count", type=int, required=True,
              help="Number of training scenes.")
@click.option("--val-count", type=int, default=0, show_default=True)
@click.option("--test-count", type=int, default=0, show_default=True)
@click.option("--frame", type=DIMS, default=None,
              help="Frame size HxW (default 288x512).")
def cmd_gen(out_dir, seed, train_count, val_count, test_count, frame):
    """Generate a synthetic dataset and its manifest."""
    kwargs = {}
    if frame is not None:
        kwargs["frame_height"], kwargs["frame_width"] = frame
    spec = synthetic.SceneSpec(**kwargs)

    for sub in ("features", "maps", "detections"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    counts = (("train", train_count), ("val", val_count), ("test", test_count))
    records = []
    index = 0
    t0 = time.time()
    for split, count in counts:
        for _ in range(count):
            sample = synthetic.generate_scene(seed, index, spec)
            fid = sample.detections.frame_id
            rec = formats.SampleRecord(
                frame_id=fid,
                feature_path=f"features/{fid}.ftn",
                gt_map_path=f"maps/{fid}.smf",
                detections_path=f"detections/{fid}.ndjson",
                split=split)
            formats.save_tensor(out_dir / rec.feature_path, sample.features)
            formats.save_map(out_dir / rec.gt_map_path, sample.gt_map)
            formats.save_detections(out_dir / rec.detections_path,
                                    [sample.detections])
            records.append(rec)
            index += 1
    manifest = formats.DatasetManifest(
        feature_dims=spec.feature_dims, frame_height=spec.frame_height,
        frame_width=spec.frame_width, records=records)
    formats.save_manifest(out_dir / "manifest.json", manifest)
    _log_sidecar(out_dir / "gen.log",
                 [f"seed {seed}", f"scenes {index}",
                  f"elapsed {time.time() - t0:.1f}s"])
    click.echo(f"wrote {index} scenes to {out_dir}")


# --- train ---------------------------------------------------------------

def _load_split(manifest_path: Path, split: str):
    manifest = formats.load_manifest(manifest_path)
    records = manifest.split_records(split)
    if not records:
        raise PipelineError(f"manifest has no {split!r} records")
    return manifest, records


@cli.command("train")
@click.option("--data", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "ckpt_path", required=True, type=click.Path(path_type=Path))
@click.option("--grid", type=GRID, default="16x16", show_default=True)
@click.option("--ratio", type=float, default=0.15, show_default=True,
              help="Binarization ratio for target encoding.")
@click.option("--epochs", type=int, default=40, show_default=True)
@click.option("--lr", type=float, default=0.01, show_default=True)
@click.option("--decay", type=float, default=0.1, show_default=True)
@click.option("--decay-every", type=int, default=10, show_default=True)
@click.option("--batch", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_train(manifest_path, ckpt_path, grid, ratio, epochs, lr, decay,
              decay_every, batch, seed):
    """Train a gaze head on the manifest's train split."""
    manifest, records = _load_split(manifest_path, "train")
    base = manifest_path.parent
    c, h, w = manifest.feature_dims
    n = len(records)
    features = np.empty((n, c, h, w), dtype=np.float64)
    targets = np.empty((n, grid.cells), dtype=np.float64)
    for i, rec in enumerate(records):
        fpath, gpath, _ = rec.resolve(base)
        tensor = formats.load_tensor(fpath)
        if tensor.shape != (c, h, w):
            raise InconsistentDimsError(
                f"{rec.frame_id}: tensor {tensor.shape} vs manifest {(c, h, w)}")
        gt = formats.load_map(gpath)
        if gt.shape != (manifest.frame_height, manifest.frame_width):
            raise InconsistentDimsError(
                f"{rec.frame_id}: map {gt.shape} vs manifest frame "
                f"({manifest.frame_height}, {manifest.frame_width})")
        features[i] = tensor
        targets[i] = saliency.encode_grid(gt, grid, ratio)

    config = model.TrainConfig(epochs=epochs, base_lr=lr, lr_decay=decay,
                               decay_every=decay_every, batch_size=batch,
                               seed=seed)
    t0 = time.time()
    params, history = model.train(
        features, targets, grid, config,
        callback=lambda s: click.echo(
            f"epoch {s.epoch:3d}  lr {s.lr:.6g}  loss {s.loss:.6f}"))
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    formats.save_checkpoint(ckpt_path, params)
    formats.save_csv(ckpt_path.with_suffix(ckpt_path.suffix + ".history.csv"),
                     ("epoch", "lr", "loss"),
                     [(s.epoch, s.lr, s.loss) for s in history])
    _log_sidecar(ckpt_path.with_suffix(ckpt_path.suffix + ".log"),
                 [f"backend {BACKEND}", f"samples {n}",
                  f"final_loss {history[-1].loss!r}",
                  f"elapsed {time.time() - t0:.1f}s"])
    click.echo(f"saved checkpoint {ckpt_path} "
               f"({model.count_params(c, h, w, grid)} params)")


# --- predict -------------------------------------------------------------

@cli.command("predict")
@click.option("--data", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--ckpt", "ckpt_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--split", type=click.Choice(formats.SPLITS), default="val",
              show_default=True)
@click.option("--sigma", type=float, default=None,
              help="Decode blur sigma in pixels (default: half a cell).")
def cmd_predict(manifest_path, ckpt_path, out_dir, split, sigma):
    """Decode predicted grid activations into per-frame saliency maps."""
    manifest, records = _load_split(manifest_path, split)
    base = manifest_path.parent
    params = formats.load_checkpoint(ckpt_path)
    if tuple(manifest.feature_dims) != (params.in_channels, params.in_height,
                                        params.in_width):
        raise PipelineError(
            f"manifest feature dims {manifest.feature_dims} do not match "
            f"checkpoint ({params.in_channels}, {params.in_height}, "
            f"{params.in_width})")
    out_dir.mkdir(parents=True, exist_ok=True)
    for rec in records:
        fpath, _, _ = rec.resolve(base)
        tensor = formats.load_tensor(fpath)
        if tensor.shape != tuple(manifest.feature_dims):
            raise InconsistentDimsError(
                f"{rec.frame_id}: tensor {tensor.shape} vs manifest "
                f"{tuple(manifest.feature_dims)}")
        probs = model.predict(params, tensor)
        decoded = saliency.decode_grid(probs, params.grid,
                                       manifest.frame_height,
                                       manifest.frame_width, sigma=sigma)
        formats.save_map(out_dir / f"{rec.frame_id}.smf", decoded)
    click.echo(f"wrote {len(records)} maps to {out_dir}")


# --- map -----------------------------------------------------------------

def _frame_detections(rec, base):
    _, _, dpath = rec.resolve(base)
    groups = formats.load_detections(dpath)
    return groups.get(rec.frame_id,
                      mapping.DetectionSet(frame_id=rec.frame_id))


@cli.command("map")
@click.option("--data", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--maps", "maps_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--split", type=click.Choice(formats.SPLITS), default="val",
              show_default=True)
@click.option("--th", type=float, default=0.5, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def cmd_map(manifest_path, maps_dir, split, th, out_path):
    """Threshold per-frame maps into focused-object sets."""
    _, records = _load_split(manifest_path, split)
    base = manifest_path.parent

    def results():
        for rec in records:
            detections = _frame_detections(rec, base)
            pred = formats.load_map(maps_dir / f"{rec.frame_id}.smf")
            yield rec.frame_id, detections, mapping.detect_focused(
                pred, detections, th)

    formats.save_focus_results(out_path, results())
    click.echo(f"wrote focus results for {len(records)} frames to {out_path}")


# --- eval / roc ----------------------------------------------------------

def _gather(records, base, maps_dir, ratio, metric_dims):
    """Per-frame pixel metrics plus pooled object labels and scores."""
    mh, mw = metric_dims
    rows, labels, scores = [], [], []
    for rec in records:
        _, gpath, _ = rec.resolve(base)
        gt = formats.load_map(gpath)
        pred = formats.load_map(maps_dir / f"{rec.frame_id}.smf")
        px = metrics.pixel_metrics(gt, pred, mh, mw)
        detections = _frame_detections(rec, base)
        frame_labels = mapping.label_ground_truth(gt, detections, ratio)
        frame_scores = mapping.detect_focused(pred, detections, 0.0).probabilities
        labels.append(frame_labels)
        scores.append(frame_scores)
        rows.append((rec.frame_id, px.kl_divergence, px.correlation,
                     len(detections), int(frame_labels.sum())))
    return rows, np.concatenate(labels), np.concatenate(scores)


@cli.command("eval")
@click.option("--data", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--maps", "maps_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--split", type=click.Choice(formats.SPLITS), default="val",
              show_default=True)
@click.option("--th", type=float, default=0.5, show_default=True)
@click.option("--ratio", type=float, default=0.15, show_default=True)
@click.option("--metric-size", type=DIMS, default="36x64", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def cmd_eval(manifest_path, maps_dir, split, th, ratio, metric_size, out_path):
    """Evaluate predicted maps against ground truth, pixels and objects."""
    _, records = _load_split(manifest_path, split)
    base = manifest_path.parent
    rows, labels, scores = _gather(records, base, maps_dir, ratio, metric_size)
    obj = metrics.evaluate_objects(labels, scores, th)
    report = {
        "kl": float(np.mean([r[1] for r in rows])),
        "cc": float(np.mean([r[2] for r in rows])),
        "auc": obj.auc, "precision": obj.precision, "recall": obj.recall,
        "f1": obj.f1, "accuracy": obj.accuracy, "tp": obj.tp, "fp": obj.fp,
        "tn": obj.tn, "fn": obj.fn, "threshold": th,
    }
    formats.save_metrics_json(out_path, report)
    formats.save_csv(out_path.parent / (out_path.stem + "_frames.csv"),
                     ("frame_id", "kl", "cc", "boxes", "focused_gt"), rows)
    click.echo(f"kl {report['kl']:.4f}  cc {report['cc']:.4f}  "
               f"auc {report['auc']:.4f}  f1 {report['f1']:.4f}")


@cli.command("roc")
@click.option("--data", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--maps", "maps_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--split", type=click.Choice(formats.SPLITS), default="val",
              show_default=True)
@click.option("--ratio", type=float, default=0.15, show_default=True)
@click.option("--rule", type=click.Choice(["gmean", "distance"]),
              default="gmean", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--th-out", type=click.Path(path_type=Path), default=None,
              help="Also write the chosen threshold to this file.")
def cmd_roc(manifest_path, maps_dir, split, ratio, rule, out_path, th_out):
    """Sweep thresholds over pooled focus scores and pick one."""
    _, records = _load_split(manifest_path, split)
    base = manifest_path.parent
    _, labels, scores = _gather(records, base, maps_dir, ratio,
                                (metrics.METRIC_HEIGHT, metrics.METRIC_WIDTH))
    curve = metrics.roc_curve(labels, scores)
    chosen = metrics.optimal_threshold(curve, rule=rule)
    formats.save_csv(out_path, ("threshold", "tpr", "fpr"),
                     [(float(t), float(a), float(b))
                      for t, a, b in zip(curve.thresholds, curve.tpr, curve.fpr)])
    if th_out is not None:
        th_out.write_text(f"{chosen!r}\n", encoding="ascii")
    click.echo(f"auc {curve.area():.6f}")
    click.echo(f"threshold {chosen!r}")


# --- baseline ------------------------------------------------------------

@cli.command("baseline")
@click.option("--data", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--split", type=click.Choice(formats.SPLITS), default="train",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--expand", "expand_dir", type=click.Path(path_type=Path),
              default=None,
              help="Also write one copy per frame of this split, so the "
                   "baseline can stand in for predictions.")
@click.option("--expand-split", type=click.Choice(formats.SPLITS),
              default="val", show_default=True)
def cmd_baseline(manifest_path, split, out_path, expand_dir, expand_split):
    """Mean training ground-truth map as a static predictor."""
    manifest, records = _load_split(manifest_path, split)
    base = manifest_path.parent
    mean_map = mapping.baseline_map(
        (formats.load_map(rec.resolve(base)[1]) for rec in records),
        manifest.frame_height, manifest.frame_width)
    formats.save_map(out_path, mean_map)
    click.echo(f"averaged {len(records)} maps into {out_path}")
    if expand_dir is not None:
        _, targets = _load_split(manifest_path, expand_split)
        expand_dir.mkdir(parents=True, exist_ok=True)
        for rec in targets:
            formats.save_map(expand_dir / f"{rec.frame_id}.smf", mean_map)
        click.echo(f"expanded to {len(targets)} frames in {expand_dir}")


# --- encode / decode / info ---------------------------------------------

@cli.command("encode")
@click.option("--map", "map_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--grid", type=GRID, default="16x16", show_default=True)
@click.option("--ratio", type=float, default=0.15, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
def cmd_encode(map_path, grid, ratio, out_path):
    """Encode one saliency map into its binary grid vector."""
    vector = saliency.encode_grid(formats.load_map(map_path), grid, ratio)
    doc = json.dumps({"grid": str(grid),
                      "vector": [int(v) for v in vector]})
    if out_path is None:
        click.echo(doc)
    else:
        out_path.write_text(doc + "\n", encoding="ascii")


@cli.command("decode")
@click.option("--vector", "vec_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON file with fields grid and vector.")
@click.option("--size", type=DIMS, required=True, help="Output map HxW.")
@click.option("--sigma", type=float, default=None)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def cmd_decode(vec_path, size, sigma, out_path):
    """Decode a grid vector back into a saliency map."""
    try:
        doc = json.loads(vec_path.read_text(encoding="utf-8"))
        grid = GridSpec.parse(doc["grid"])
        vector = np.asarray(doc["vector"], dtype=np.float64)
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise PipelineError(f"{vec_path}: bad vector file: {e!r}") from e
    h, w = size
    formats.save_map(out_path, saliency.decode_grid(vector, grid, h, w,
                                                    sigma=sigma))


@cli.command("info")
@click.option("--ckpt", "ckpt_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
def cmd_info(ckpt_path):
    """Print checkpoint dimensions and parameter count."""
    params = formats.load_checkpoint(ckpt_path)
    click.echo(f"channels {params.in_channels}")
    click.echo(f"height {params.in_height}")
    click.echo(f"width {params.in_width}")
    click.echo(f"grid {params.grid}")
    click.echo(f"params {model.count_params(params.in_channels, params.in_height, params.in_width, params.grid)}")
    click.echo(f"backend {BACKEND}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except PipelineError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 130
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
