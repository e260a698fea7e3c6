"""Bit-exact file formats.

Binary formats carry a one-line ASCII header then raw little-endian
payload, row-major:

  SMF1 <width> <height>\n   + width*height float32   (saliency map)
  FTN1 <c> <h> <w>\n        + c*h*w float32          (feature tensor)
  GZH1 + 5 uint32 (c h w rows cols) + float64 params (checkpoint)

Detections are newline-delimited JSON, one box per line; manifests are
a single JSON document listing per-frame files. Writers are
deterministic: same values in, same bytes out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gridgaze import saliency
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
from gridgaze.model import HIDDEN_CHANNELS, ModelParams

_MAP_MAGIC = "SMF1"
_TENSOR_MAGIC = "FTN1"
_CKPT_MAGIC = b"GZH1"
_HEADER_CAP = 128

SPLITS = ("train", "val", "test")


# --- binary header helpers ----------------------------------------------

def _read_header(raw: bytes, magic: str, n_dims: int, path) -> tuple[list[int], int]:
    end = raw.find(b"\n", 0, _HEADER_CAP)
    if end < 0:
        raise MalformedHeaderError(f"{path}: no header line within "
                                   f"{_HEADER_CAP} bytes")
    try:
        tokens = raw[:end].decode("ascii").split()
    except UnicodeDecodeError as e:
        raise MalformedHeaderError(f"{path}: header is not ASCII") from e
    if len(tokens) != 1 + n_dims or tokens[0] != magic:
        raise MalformedHeaderError(
            f"{path}: expected '{magic}' with {n_dims} dims, got {tokens!r}")
    try:
        dims = [int(t) for t in tokens[1:]]
    except ValueError as e:
        raise MalformedHeaderError(f"{path}: non-integer dims {tokens[1:]!r}") from e
    if any(d < 1 for d in dims):
        raise MalformedHeaderError(f"{path}: dims must be >= 1, got {dims}")
    return dims, end + 1


def _read_f32(raw: bytes, offset: int, count: int, path) -> np.ndarray:
    body = raw[offset:]
    if len(body) < 4 * count:
        raise TruncatedPayloadError(
            f"{path}: need {4 * count} payload bytes, found {len(body)}")
    if len(body) > 4 * count:
        raise TruncatedPayloadError(
            f"{path}: {len(body) - 4 * count} trailing bytes after payload")
    values = np.frombuffer(body, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise NegativeValueError(f"{path}: payload contains non-finite values")
    if np.any(values < 0):
        raise NegativeValueError(f"{path}: payload contains negative values")
    return values


# --- saliency maps (SMF1) ------------------------------------------------

def save_map(path, saliency_map) -> None:
    arr = saliency.as_map(saliency_map)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"{_MAP_MAGIC} {w} {h}\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_map(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (w, h), offset = _read_header(raw, _MAP_MAGIC, 2, path)
    return _read_f32(raw, offset, w * h, path).reshape(h, w)


# --- feature tensors (FTN1) ----------------------------------------------

def save_tensor(path, tensor) -> None:
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionMismatchError(
            f"feature tensor must be 3-D, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise NegativeValueError("feature tensor must be finite and non-negative")
    c, h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"{_TENSOR_MAGIC} {c} {h} {w}\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (c, h, w), offset = _read_header(raw, _TENSOR_MAGIC, 3, path)
    return _read_f32(raw, offset, c * h * w, path).reshape(c, h, w)


# --- model checkpoints (GZH1) --------------------------------------------

def save_checkpoint(path, params: ModelParams) -> None:
    dims = np.array([params.in_channels, params.in_height, params.in_width,
                     params.grid.rows, params.grid.cols], dtype="<u4")
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(dims.tobytes())
        for a in params.arrays():
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:4] != _CKPT_MAGIC:
        raise MalformedHeaderError(f"{path}: bad checkpoint magic {raw[:4]!r}")
    if len(raw) < 24:
        raise TruncatedPayloadError(f"{path}: checkpoint header truncated")
    c, h, w, rows, cols = (int(v) for v in np.frombuffer(raw[4:24], dtype="<u4"))
    if min(c, h, w, rows, cols) < 1:
        raise MalformedHeaderError(f"{path}: non-positive checkpoint dims")
    spec = GridSpec(rows, cols)
    flat = HIDDEN_CHANNELS * ((h + 1) // 2) * ((w + 1) // 2)
    shapes = [(HIDDEN_CHANNELS, c), (HIDDEN_CHANNELS,),
              (spec.cells, flat), (spec.cells,)]
    need = sum(int(np.prod(s)) for s in shapes)
    body = raw[24:]
    if len(body) != 8 * need:
        raise TruncatedPayloadError(
            f"{path}: need {8 * need} parameter bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f8")
    arrays, pos = [], 0
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(values[pos:pos + n].reshape(s).copy())
        pos += n
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NegativeValueError(f"{path}: checkpoint contains non-finite values")
    cw, cb, dw, db = arrays
    return ModelParams(cw, cb, dw, db, c, h, w, spec)


# --- detections (NDJSON) -------------------------------------------------

_BOX_FIELDS = ("frame_id", "class_id", "confidence",
               "x_min", "y_min", "x_max", "y_max")


def save_detections(path, detection_sets) -> None:
    """One JSON line per box, frames in the given order."""
    with open(path, "w", encoding="ascii") as f:
        for ds in detection_sets:
            for b in ds.boxes:
                f.write(json.dumps({
                    "frame_id": ds.frame_id, "class_id": b.class_id,
                    "confidence": b.confidence, "x_min": b.x_min,
                    "y_min": b.y_min, "x_max": b.x_max, "y_max": b.y_max,
                }) + "\n")


def load_detections(path) -> dict[str, DetectionSet]:
    """Boxes grouped by frame_id; first-appearance and per-frame input
    order both preserved."""
    grouped: dict[str, list[BoundingBox]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", line=lineno) from e
            if not isinstance(obj, dict):
                raise ParseError("each line must be a JSON object", line=lineno)
            missing = [k for k in _BOX_FIELDS if k not in obj]
            if missing:
                raise ParseError(f"missing fields {missing}", line=lineno)
            frame_id = obj["frame_id"]
            if not isinstance(frame_id, str) or not frame_id:
                raise ParseError("frame_id must be a non-empty string",
                                 line=lineno)
            try:
                box = BoundingBox(
                    x_min=float(obj["x_min"]), y_min=float(obj["y_min"]),
                    x_max=float(obj["x_max"]), y_max=float(obj["y_max"]),
                    class_id=int(obj["class_id"]),
                    confidence=float(obj["confidence"]))
            except InvalidBoxError as e:
                raise InvalidBoxError(f"line {lineno}: {e}") from e
            except (TypeError, ValueError) as e:
                raise ParseError(f"bad field value: {e}", line=lineno) from e
            grouped.setdefault(frame_id, []).append(box)
    return {fid: DetectionSet(frame_id=fid, boxes=tuple(boxes))
            for fid, boxes in grouped.items()}


# --- focus results (NDJSON, one line per frame) --------------------------

def save_focus_results(path, results) -> None:
    """results: iterable of (frame_id, DetectionSet, FocusResult)."""
    with open(path, "w", encoding="ascii") as f:
        for frame_id, detections, res in results:
            boxes = [{
                "class_id": b.class_id, "confidence": b.confidence,
                "x_min": b.x_min, "y_min": b.y_min,
                "x_max": b.x_max, "y_max": b.y_max,
                "focus_probability": float(p),
                "focused": bool(fo), "out_of_frame": bool(oo),
            } for b, p, fo, oo in zip(detections.boxes, res.probabilities,
                                      res.focused, res.out_of_frame)]
            f.write(json.dumps({"frame_id": frame_id,
                                "threshold": res.threshold,
                                "boxes": boxes}) + "\n")


# --- dataset manifests ---------------------------------------------------

@dataclass(frozen=True)
class SampleRecord:
    frame_id: str
    feature_path: str
    gt_map_path: str
    detections_path: str
    split: str

    def __post_init__(self):
        if not self.frame_id:
            raise ManifestError("record frame_id must be non-empty")
        for name in ("feature_path", "gt_map_path", "detections_path"):
            if not getattr(self, name):
                raise ManifestError(f"record {self.frame_id}: empty {name}")
        if self.split not in SPLITS:
            raise ManifestError(
                f"record {self.frame_id}: split {self.split!r} not in {SPLITS}")

    def resolve(self, base) -> tuple[Path, Path, Path]:
        b = Path(base)
        return (b / self.feature_path, b / self.gt_map_path,
                b / self.detections_path)


@dataclass(frozen=True)
class DatasetManifest:
    feature_dims: tuple[int, int, int]
    frame_height: int
    frame_width: int
    records: tuple[SampleRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "feature_dims", tuple(self.feature_dims))
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.feature_dims) != 3 or any(d < 1 for d in self.feature_dims):
            raise ManifestError(f"bad feature_dims {self.feature_dims}")
        if self.frame_height < 1 or self.frame_width < 1:
            raise ManifestError("frame dims must be >= 1")
        seen = set()
        for r in self.records:
            if r.frame_id in seen:
                raise ManifestError(f"duplicate frame_id {r.frame_id!r}")
            seen.add(r.frame_id)

    def split_records(self, split: str) -> tuple[SampleRecord, ...]:
        if split not in SPLITS:
            raise ManifestError(f"unknown split {split!r}")
        return tuple(r for r in self.records if r.split == split)


def save_manifest(path, manifest: DatasetManifest) -> None:
    doc = {
        "feature_dims": list(manifest.feature_dims),
        "frame_height": manifest.frame_height,
        "frame_width": manifest.frame_width,
        "records": [{
            "frame_id": r.frame_id, "feature_path": r.feature_path,
            "gt_map_path": r.gt_map_path,
            "detections_path": r.detections_path, "split": r.split,
        } for r in manifest.records],
    }
    with open(path, "w", encoding="ascii") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_manifest(path) -> DatasetManifest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: invalid JSON: {e.msg}") from e
    try:
        records = tuple(SampleRecord(
            frame_id=r["frame_id"], feature_path=r["feature_path"],
            gt_map_path=r["gt_map_path"],
            detections_path=r["detections_path"], split=r["split"],
        ) for r in doc["records"])
        return DatasetManifest(
            feature_dims=tuple(doc["feature_dims"]),
            frame_height=doc["frame_height"], frame_width=doc["frame_width"],
            records=records)
    except (KeyError, TypeError) as e:
        raise ManifestError(f"{path}: malformed manifest: {e!r}") from e


# --- reports -------------------------------------------------------------

METRIC_FIELDS = ("kl", "cc", "auc", "precision", "recall", "f1",
                 "accuracy", "tp", "fp", "tn", "fn", "threshold")


def save_metrics_json(path, values: dict) -> None:
    """Metrics report with a fixed field order, so equal values give
    byte-identical files."""
    missing = [k for k in METRIC_FIELDS if k not in values]
    if missing:
        raise ManifestError(f"metrics report missing fields {missing}")
    doc = {k: values[k] for k in METRIC_FIELDS}
    with open(path, "w", encoding="ascii") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_metrics_json(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    missing = [k for k in METRIC_FIELDS if k not in doc]
    if missing:
        raise ManifestError(f"{path}: metrics report missing fields {missing}")
    return doc


def save_csv(path, header: tuple[str, ...], rows) -> None:
    """Tiny deterministic CSV writer; floats via repr for exactness."""
    with open(path, "w", encoding="ascii") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(
                repr(v) if isinstance(v, float) else str(v)
                for v in row) + "\n")
