"""Evaluation protocol: ordinal tuple accuracy and numeric depth metrics.

Numeric metrics run over a grid of alignment modes (how a prediction is
fitted to the reference before scoring) and layer strategies (which
ground-truth layer serves as the reference at each pixel).  Ordinal
accuracy scores relative-depth tuples against predicted depths, split
into subsets by the layer composition of each tuple.
"""

from dataclasses import dataclass, field

import numpy as np

from . import canonjson
from .annotations import MAX_LAYER_ID, classify_subsets
from .ldgt import LayeredDepthMap

CLIP_DEFAULT = (0.001, 30.0)
ALIGNMENTS = ("metric", "affine", "disparity", "scale_shift")
STRATEGIES = ("first", "last", "adapted")
SILOG_LAMBDA = 0.85


class MetricsError(ValueError):
    pass


class AlignmentError(MetricsError):
    pass


# ---------------------------------------------------------------------------
# prediction sources


@dataclass(frozen=True)
class SingleLayer:
    """One dense depth map; evaluated only against all-layer-1 tuples."""
    depth: np.ndarray  # (H, W) float

    @property
    def shape(self):
        return self.depth.shape


@dataclass(frozen=True)
class MultiLayer:
    """Layered prediction; tuple points are looked up at their layer id."""
    layers: LayeredDepthMap

    @property
    def shape(self):
        return self.layers.counts.shape


def _pixel_index(x, y, shape):
    """Round-half-to-even lookup; None when outside the image."""
    px = int(np.round(x))
    py = int(np.round(y))
    h, w = shape
    if not (0 <= px < w and 0 <= py < h):
        return None
    return py, px


def _lookup(pred, point):
    """Predicted depth at an annotated point, or an error string."""
    idx = _pixel_index(point.x, point.y, pred.shape)
    if idx is None:
        return None, f"point ({point.x}, {point.y}) outside prediction bounds"
    if isinstance(pred, SingleLayer):
        d = float(pred.depth[idx])
    else:
        count = int(pred.layers.counts[idx])
        if point.layer > count:
            return None, (f"point ({point.x}, {point.y}) layer {point.layer} "
                          f"exceeds pixel layer count {count}")
        d = float(pred.layers.depths[idx[0], idx[1], point.layer - 1])
    if not np.isfinite(d):
        return None, f"non-finite prediction at ({point.x}, {point.y})"
    return d, None


def tuple_accuracy(pred, tuples):
    """Per-kind, per-subset ordinal accuracy.

    A tuple is correct iff predicted depths are strictly increasing in
    annotated order; ties are incorrect.  SingleLayer predictions only
    evaluate tuples whose points are all on layer 1; others are skipped.
    Returns {"cells": {kind: {subset: {"correct", "count"}}},
    "skipped": n, "errors": [...]}.
    """
    cells = {}
    skipped = 0
    errors = []
    for t in tuples:
        if isinstance(pred, SingleLayer) and any(p.layer != 1 for p in t.points):
            skipped += 1
            continue
        depths = []
        bad = None
        for p in t.points:
            d, err = _lookup(pred, p)
            if err is not None:
                bad = err
                break
            depths.append(d)
        if bad is not None:
            errors.append(f"{t.kind}: {bad}")
            continue
        ok = all(a < b for a, b in zip(depths, depths[1:]))
        tags = t.tags if t.tags else classify_subsets(t)
        for tag in tags:
            cell = cells.setdefault(t.kind, {}).setdefault(
                tag, {"correct": 0, "count": 0})
            cell["count"] += 1
            cell["correct"] += int(ok)
    return {"cells": cells, "skipped": skipped, "errors": errors}


def accuracy_of(cells, kind, subset):
    cell = cells.get(kind, {}).get(subset)
    return None if cell is None or cell["count"] == 0 \
        else cell["correct"] / cell["count"]


# ---------------------------------------------------------------------------
# numeric metrics


def depth_metrics(pred, gt, mask, clip=CLIP_DEFAULT):
    """(AbsRel, RMS, delta1, delta2) over the mask, clipped to the range."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MetricsError("empty evaluation mask")
    p = np.clip(np.asarray(pred, dtype=float)[mask], *clip)
    g = np.clip(np.asarray(gt, dtype=float)[mask], *clip)
    absrel = float(np.mean(np.abs(p - g) / g))
    rms = float(np.sqrt(np.mean((p - g) ** 2)))
    ratio = np.maximum(p / g, g / p)
    d1 = float(np.mean(ratio < 1.25))
    d2 = float(np.mean(ratio < 1.25 ** 2))
    return absrel, rms, d1, d2


def align(pred, gt, mask, mode):
    """Fit the prediction to the reference; returns the aligned map."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mode == "metric":
        return pred
    p = pred[mask]
    g = gt[mask]
    if len(p) < 2 or np.ptp(g) == 0.0:
        raise AlignmentError(f"{mode}: need >=2 masked pixels with distinct gt")
    if mode == "affine":
        if np.ptp(p) == 0.0:
            raise AlignmentError("affine: constant prediction is degenerate")
        A = np.stack([p, np.ones_like(p)], axis=1)
        (a, b), *_ = np.linalg.lstsq(A, g, rcond=None)
        return a * pred + b
    if mode == "disparity":
        if (p <= 0).any() or (g <= 0).any():
            raise AlignmentError("disparity: non-positive depths in mask")
        dp = 1.0 / p
        if np.ptp(dp) == 0.0:
            raise AlignmentError("disparity: constant prediction is degenerate")
        A = np.stack([dp, np.ones_like(dp)], axis=1)
        (a, b), *_ = np.linalg.lstsq(A, 1.0 / g, rcond=None)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1.0 / (a / pred + b)
        return out
    if mode == "scale_shift":
        mp = np.median(p)
        if mp == 0.0:
            raise AlignmentError("scale_shift: zero median prediction")
        a = np.median(g) / mp
        b = np.median(g - a * p)
        return a * pred + b
    raise ValueError(f"unknown alignment mode {mode!r}")


def select_reference(gt: LayeredDepthMap, pred, strategy):
    """Per-pixel reference depth for a layer strategy.

    Returns (reference, valid) where valid excludes zero-layer pixels.
    """
    valid = gt.counts > 0
    if strategy == "first":
        return gt.layer(1), valid
    if strategy == "last":
        return gt.last_layer(), valid
    if strategy == "adapted":
        pred = np.asarray(pred, dtype=float)
        diff = np.abs(gt.depths - pred[:, :, None])
        present = np.arange(gt.max_layers)[None, None, :] < gt.counts[:, :, None]
        diff = np.where(present, diff, np.inf)
        best = np.argmin(diff, axis=2)
        ref = np.take_along_axis(gt.depths, best[:, :, None], axis=2)[:, :, 0]
        return np.where(valid, ref, np.nan), valid
    raise ValueError(f"unknown layer strategy {strategy!r}")


def snap_layers(gt: LayeredDepthMap, target: int) -> LayeredDepthMap:
    """Dense per-layer maps: absent layers inherit from the layer below.

    Zero-layer pixels stay undefined at every layer.  Idempotent.
    """
    if target < 1:
        raise ValueError("target layer count must be >= 1")
    h, w = gt.counts.shape
    out = np.full((h, w, target), np.nan, dtype=np.float32)
    shared = min(target, gt.max_layers)
    out[:, :, :shared] = gt.depths[:, :, :shared]
    for i in range(1, target):
        missing = np.isnan(out[:, :, i])
        out[:, :, i] = np.where(missing, out[:, :, i - 1], out[:, :, i])
    counts = np.where(gt.counts > 0, target, 0).astype(np.uint8)
    return LayeredDepthMap(counts, out)


def silog_loss(pred, gt, mask, lam=SILOG_LAMBDA):
    """Scale-invariant logarithmic loss over the mask."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MetricsError("empty evaluation mask")
    p = np.asarray(pred, dtype=float)[mask]
    g = np.asarray(gt, dtype=float)[mask]
    if (p <= 0).any() or (g <= 0).any():
        raise MetricsError("silog requires positive depths in the mask")
    d = np.log(p) - np.log(g)
    # rounding can push the variance estimate a hair below zero
    return float(np.sqrt(max(np.mean(d ** 2) - lam * np.mean(d) ** 2, 0.0)))


# ---------------------------------------------------------------------------
# full report


@dataclass
class EvalReport:
    tuple_cells: dict = field(default_factory=dict)   # kind -> subset -> cell
    tuple_skipped: int = 0
    depth_cells: dict = field(default_factory=dict)   # "mask/strategy/alignment"
    errors: list = field(default_factory=list)
    clip: tuple = CLIP_DEFAULT
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        subsets = ["All", "Mixed"] + [f"Layer-{i}" for i in
                                      range(1, MAX_LAYER_ID + 1)]
        tuples = {}
        for kind, per_subset in sorted(self.tuple_cells.items()):
            tuples[kind] = {}
            for sub in subsets:
                cell = per_subset.get(sub)
                if cell is None:
                    continue
                acc = cell["correct"] / cell["count"] if cell["count"] else None
                tuples[kind][sub] = {"accuracy": acc, "count": cell["count"]}
        return {
            "tuples": tuples,
            "tuple_skipped": self.tuple_skipped,
            "depth": {k: v for k, v in sorted(self.depth_cells.items())},
            "errors": sorted(self.errors),
            "clip": list(self.clip),
            "provenance": self.provenance,
        }

    def serialize(self) -> bytes:
        return canonjson.dumps(self.to_json())


def evaluate(pred, gt: LayeredDepthMap, trans_mask, tuples,
             strategies=STRATEGIES, alignments=ALIGNMENTS,
             clip=CLIP_DEFAULT, provenance=None) -> EvalReport:
    """Fill the full tuple-accuracy and depth-metric grid for one image."""
    report = EvalReport(clip=tuple(clip), provenance=provenance or {})

    acc = tuple_accuracy(pred, tuples)
    report.tuple_cells = acc["cells"]
    report.tuple_skipped = acc["skipped"]
    report.errors.extend(acc["errors"])

    trans_mask = np.asarray(trans_mask, dtype=bool)
    for strategy in strategies:
        # a layered prediction is reduced with the same selector as the
        # reference (first vs first, last vs last); adapted matches the
        # prediction's front layer to the nearest gt layer
        if isinstance(pred, SingleLayer):
            pred_map = pred.depth
        elif strategy == "last":
            pred_map = pred.layers.last_layer()
        else:
            pred_map = pred.layers.layer(1)
        ref, valid = select_reference(gt, pred_map, strategy)
        finite = valid & np.isfinite(pred_map) & np.isfinite(ref)
        for mask_name, mask in (("all", finite), ("trans", finite & trans_mask)):
            for mode in alignments:
                key = f"{mask_name}/{strategy}/{mode}"
                try:
                    aligned = align(pred_map, ref, mask, mode)
                    absrel, rms, d1, d2 = depth_metrics(aligned, ref, mask, clip)
                except MetricsError as e:
                    report.errors.append(f"{key}: {e}")
                    continue
                report.depth_cells[key] = {
                    "AbsRel": absrel, "RMS": rms,
                    "delta1": d1, "delta2": d2,
                    "pixels": int(mask.sum()),
                }
    return report
