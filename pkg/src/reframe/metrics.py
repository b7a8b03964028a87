"""Saliency-map evaluation: MAE, max-F, max-E and S-measure.

Predictions are grayscale maps with values in [0, 1]; ground truth is
binary.  Thresholded measures binarize the prediction at s > t for
every t in {0, ..., 255}/255.  Sequence evaluation averages MAE and
S-measure per frame, while max-F and max-E average the per-threshold
curves over frames before taking the maximum over thresholds.

The formula conventions are frozen here (epsilon = 1e-12 alignment
stabilizer, population standard deviations, explicit degenerate-case
branches) because published implementations disagree on them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .model import AnnotationFile, DimensionMismatchError, MetricReport, ReframeError

#: Precision/recall trade-off of the F-measure.
BETA_SQ = 0.3
#: Object/region mix of the S-measure.
S_ALPHA = 0.5
#: Stabilizer of the alignment term in max-E.
EPSILON = 1e-12

#: Thresholds shared by max-F and max-E.
THRESHOLDS = np.arange(256) / 255.0


class MetricError(ReframeError):
    """Inputs violate a metric's preconditions."""


def _check_pair(s: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if s.ndim != 2 or g.ndim != 2:
        raise MetricError("prediction and ground truth must be 2-D maps")
    if s.shape != g.shape:
        raise DimensionMismatchError(g.shape, s.shape, "prediction")
    if s.min() < 0.0 or s.max() > 1.0:
        raise MetricError("prediction values must lie in [0, 1]")
    if not np.all((g == 0.0) | (g == 1.0)):
        raise MetricError("ground truth must be binary")
    return s, g


def mae(s: np.ndarray, g: np.ndarray) -> float:
    """Mean absolute error over pixels."""
    s, g = _check_pair(s, g)
    return float(np.mean(np.abs(s - g)))


def _threshold_counts(
    s: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """(TP, FP) per threshold plus foreground/background pixel counts."""
    s_fg = np.sort(s[g > 0].ravel())
    s_bg = np.sort(s[g == 0].ravel())
    tp = s_fg.size - np.searchsorted(s_fg, THRESHOLDS, side="right")
    fp = s_bg.size - np.searchsorted(s_bg, THRESHOLDS, side="right")
    return tp.astype(np.float64), fp.astype(np.float64), s_fg.size, s_bg.size


def f_curve(s: np.ndarray, g: np.ndarray, beta_sq: float = BETA_SQ) -> np.ndarray:
    """F score per threshold; 0/0 precision, recall and F all resolve to 0."""
    s, g = _check_pair(s, g)
    tp, fp, n_fg, _ = _threshold_counts(s, g)
    if n_fg == 0:
        raise MetricError("ground truth has no foreground pixels; recall undefined")
    retrieved = tp + fp
    precision = np.divide(tp, retrieved, out=np.zeros_like(tp), where=retrieved > 0)
    recall = tp / n_fg
    denom = beta_sq * precision + recall
    return np.divide(
        (1.0 + beta_sq) * precision * recall,
        denom,
        out=np.zeros_like(denom),
        where=denom > 0,
    )


def max_f(s: np.ndarray, g: np.ndarray, beta_sq: float = BETA_SQ) -> float:
    """Maximum F score over the threshold sweep."""
    return float(f_curve(s, g, beta_sq).max())


def _enhanced_cell(phi_g: np.ndarray, phi_b: np.ndarray) -> np.ndarray:
    xi = 2.0 * phi_g * phi_b / (phi_g * phi_g + phi_b * phi_b + EPSILON)
    return (1.0 + xi) ** 2 / 4.0


def e_curve(s: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Enhanced-alignment score per threshold.

    With a binary prediction the per-pixel alignment takes one of four
    values given the (B, G) cell, so each threshold reduces to the
    contingency counts.
    """
    s, g = _check_pair(s, g)
    tp, fp, n_fg, n_bg = _threshold_counts(s, g)
    n = float(n_fg + n_bg)
    p = (tp + fp) / n  # mean of the binarized prediction
    if n_fg == 0:  # ground truth all zero
        return 1.0 - p
    if n_bg == 0:  # ground truth all one
        return p
    q = n_fg / n
    b_one = 1.0 - p
    b_zero = -p
    g_one = 1.0 - q
    g_zero = -q
    fn = n_fg - tp
    tn = n_bg - fp
    total = (
        tp * _enhanced_cell(g_one, b_one)
        + fp * _enhanced_cell(g_zero, b_one)
        + fn * _enhanced_cell(g_one, b_zero)
        + tn * _enhanced_cell(g_zero, b_zero)
    )
    return total / n


def max_e(s: np.ndarray, g: np.ndarray) -> float:
    """Maximum enhanced-alignment score over the threshold sweep."""
    return float(e_curve(s, g).max())


def _object_score(region: np.ndarray) -> float:
    if region.size == 0:
        return 0.0
    mean = float(region.mean())
    std = float(region.std())
    return 2.0 * mean / (mean * mean + 1.0 + 2.0 * std)


def _s_object(s: np.ndarray, g: np.ndarray) -> float:
    mu = float(g.mean())
    fg = s[g > 0]
    bg = (1.0 - s)[g == 0]
    return mu * _object_score(fg) + (1.0 - mu) * _object_score(bg)


def _split_boundaries(centroid: float, extent: int) -> tuple[int, ...]:
    """Pixel boundary candidates nearest a centroid coordinate.

    A centroid exactly halfway between two boundaries yields both; the
    region score averages over them.  This keeps the quadrant split
    mirror-symmetric, so the measure is invariant under map flips.
    """
    low = int(np.floor(centroid))
    frac = centroid - low
    if frac > 0.5:
        candidates = (low + 1,)
    elif frac < 0.5:
        candidates = (low,)
    else:
        candidates = (low, low + 1)
    return tuple(min(max(b, 0), extent) for b in candidates)


def _foreground_centroid(g: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Quadrant boundary candidates nearest the foreground centroid."""
    ys, xs = np.nonzero(g)
    h, w = g.shape
    return (
        _split_boundaries(float(xs.mean()) + 0.5, w),
        _split_boundaries(float(ys.mean()) + 0.5, h),
    )


def _ssim_quadrant(x: np.ndarray, y: np.ndarray) -> float:
    mx = float(x.mean())
    my = float(y.mean())
    # population moments; any shared normalization cancels in the ratio
    var_x = float(((x - mx) ** 2).mean())
    var_y = float(((y - my) ** 2).mean())
    cov = float(((x - mx) * (y - my)).mean())
    num = 4.0 * mx * my * cov
    den = (mx * mx + my * my) * (var_x + var_y)
    if den == 0.0:
        return 1.0 if np.array_equal(x, y) else 0.0
    return num / den


def _s_region_split(s: np.ndarray, g: np.ndarray, cx: int, cy: int) -> float:
    area = float(g.size)
    score = 0.0
    for sq, gq in (
        (s[:cy, :cx], g[:cy, :cx]),
        (s[:cy, cx:], g[:cy, cx:]),
        (s[cy:, :cx], g[cy:, :cx]),
        (s[cy:, cx:], g[cy:, cx:]),
    ):
        if sq.size == 0:
            continue
        score += (sq.size / area) * _ssim_quadrant(sq, gq)
    return score


def _s_region(s: np.ndarray, g: np.ndarray) -> float:
    xs, ys = _foreground_centroid(g)
    splits = [(cx, cy) for cx in xs for cy in ys]
    return sum(_s_region_split(s, g, cx, cy) for cx, cy in splits) / len(splits)


def s_measure(s: np.ndarray, g: np.ndarray, alpha: float = S_ALPHA) -> float:
    """Structure measure mixing object- and region-level similarity.

    Degenerate ground truths bypass the mix: all-zero scores the
    complement mean of the prediction, all-one its mean.  The result is
    clamped to [0, 1].
    """
    s, g = _check_pair(s, g)
    mu = float(g.mean())
    if mu == 0.0:
        value = 1.0 - float(s.mean())
    elif mu == 1.0:
        value = float(s.mean())
    else:
        value = alpha * _s_object(s, g) + (1.0 - alpha) * _s_region(s, g)
    return float(min(1.0, max(0.0, value)))


# --- prediction export ---------------------------------------------------------

def export_prediction_masks(
    af: AnnotationFile,
    instruction_text: str,
    out_dir: str | Path,
    pattern: str = "%05d.png",
) -> list[Path]:
    """Write per-frame salient-object predictions for sequence evaluation.

    Each scene's selected objects (heuristic salience plus instruction
    relevance) are unioned into one binary mask that is replicated
    across the scene's frames — one mask per object per scene, which
    also avoids jitter from per-frame re-selection.  Scenes without
    objects predict all-background.
    """
    from .planner import Instruction, select_salient

    instr = Instruction(text=instruction_text)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for scene, ann in zip(af.scenes, af.annotations):
        union = np.zeros((af.height, af.width), dtype=np.uint8)
        if ann.objects:
            for oid in select_salient(ann, instr):
                union |= ann.find(oid).mask.to_array()
        png = Image.fromarray(union * 255, mode="L")
        for t in range(scene.start, scene.end):
            path = out / (pattern % t)
            png.save(path, format="PNG")
            paths.append(path)
    return paths


# --- sequence evaluation -----------------------------------------------------

def load_saliency_png(path: str | Path) -> np.ndarray:
    """8-bit grayscale PNG -> float map in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def load_groundtruth_png(path: str | Path) -> np.ndarray:
    """8-bit grayscale PNG -> binary map (foreground where value > 127)."""
    return (load_saliency_png(path) > 0.5).astype(np.float64)


def evaluate_sequence(pred_dir: str | Path, gt_dir: str | Path) -> MetricReport:
    """Evaluate a directory pair matched by identical PNG filenames."""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    pred_names = {p.name for p in pred_dir.glob("*.png")}
    gt_names = {p.name for p in gt_dir.glob("*.png")}
    if not gt_names:
        raise MetricError(f"no ground-truth PNGs under {gt_dir}")
    if pred_names != gt_names:
        missing = sorted(gt_names - pred_names)
        extra = sorted(pred_names - gt_names)
        raise MetricError(
            f"prediction/ground-truth file sets differ "
            f"(missing {missing[:3]}, extra {extra[:3]})"
        )

    maes: list[float] = []
    s_values: list[float] = []
    f_sum = np.zeros(256)
    e_sum = np.zeros(256)
    names = sorted(gt_names)
    for name in names:
        s = load_saliency_png(pred_dir / name)
        g = load_groundtruth_png(gt_dir / name)
        if s.shape != g.shape:
            raise DimensionMismatchError(g.shape, s.shape, f"frame {name}")
        maes.append(mae(s, g))
        s_values.append(s_measure(s, g))
        f_sum += f_curve(s, g)
        e_sum += e_curve(s, g)

    n = len(names)
    return MetricReport(
        mae=float(np.mean(maes)),
        max_f=float((f_sum / n).max()),
        max_e=float((e_sum / n).max()),
        s_m=float(np.mean(s_values)),
        frame_count=n,
    )
