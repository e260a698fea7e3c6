"""gridgaze: grid-encoded driver gaze prediction and focused-object
detection.

Pipeline: encode ground-truth saliency maps as binary grid vectors,
train a small head from detector feature tensors to per-cell gaze
probabilities, decode predictions back into maps, and intersect them
with detected objects to get the focused set.
"""

from gridgaze.backend import BACKEND
from gridgaze.grid import GridSpec
from gridgaze.mapping import (
    BoundingBox,
    DetectionSet,
    FocusResult,
    baseline_map,
    detect_focused,
    focus_probability,
    label_ground_truth,
)
from gridgaze.metrics import (
    ObjectMetrics,
    PixelMetrics,
    RocCurve,
    auc,
    confusion,
    evaluate_objects,
    kl_divergence,
    optimal_threshold,
    pearson_cc,
    prf_accuracy,
    roc_curve,
)
from gridgaze.model import (
    ModelParams,
    TrainConfig,
    count_params,
    forward,
    init_params,
    predict,
    train,
)
from gridgaze.saliency import (
    binarize_map,
    decode_grid,
    encode_grid,
    gaussian_blur,
    normalize_distribution,
    normalize_peak,
    resize_bilinear,
)
from gridgaze.synthetic import SceneSpec, SyntheticSample, generate_dataset, generate_scene

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "GridSpec", "BoundingBox", "DetectionSet", "FocusResult",
    "baseline_map", "detect_focused", "focus_probability",
    "label_ground_truth", "ObjectMetrics", "PixelMetrics", "RocCurve",
    "auc", "confusion", "evaluate_objects", "kl_divergence",
    "optimal_threshold", "pearson_cc", "prf_accuracy", "roc_curve",
    "ModelParams", "TrainConfig", "count_params", "forward", "init_params",
    "predict", "train", "binarize_map", "decode_grid", "encode_grid",
    "gaussian_blur", "normalize_distribution", "normalize_peak",
    "resize_bilinear", "SceneSpec", "SyntheticSample", "generate_dataset",
    "generate_scene", "__version__",
]
