"""Blueprint execution: crop geometry, zoom/fade timelines, resampling.

Each scene is rendered as 1-3 equal-height horizontal bands stacked
top-to-bottom, one per selected object.  A band samples the source
through a crop window of the band's aspect ratio that covers the
object's padded bounding box.  Windows are clamped by translation, and
shrunk uniformly only when they would not fit the source at all, so the
aspect ratio is exact and the subject stays inside its band.  Crop
windows are fixed for the whole scene (no per-frame re-centering);
only the zoom ramp scales them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    AspectRatio,
    BBox,
    Blueprint,
    EffectIn,
    EffectTrans,
    FrameSequence,
    ReframeError,
    Scene,
    SceneAnnotation,
    ScenePlan,
    ValidationError,
    validate_blueprint,
)


class RenderError(ReframeError):
    """A blueprint could not be executed against the given inputs."""


@dataclass(frozen=True)
class CropWindow:
    """Axis-aligned source-space sampling window (center plus extent)."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValidationError("crop window extent must be positive")

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2.0


@dataclass(frozen=True)
class Viewport:
    """Output-space rectangle a sub-window renders into."""

    x: int
    y: int
    w: int
    h: int

    @property
    def aspect(self) -> float:
        return self.w / self.h


@dataclass(frozen=True)
class CropTimeline:
    """Per-frame crop windows (one per band) and fade weights for a scene."""

    scene_index: int
    windows: tuple[tuple[CropWindow, ...], ...]
    fades: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.windows) != len(self.fades):
            raise ValidationError("one fade weight required per frame")


@dataclass(frozen=True)
class RenderConfig:
    """Output geometry and effect intensities."""

    out_width: int
    out_height: int
    zoom_depth: float = 0.8
    fade_frames: int | None = None
    margin: float = 0.10
    resampling: str = "bilinear"

    def __post_init__(self) -> None:
        if self.out_width <= 0 or self.out_height <= 0:
            raise ValidationError("output dimensions must be positive")
        if not (0.0 < self.zoom_depth < 1.0):
            raise ValidationError("zoom_depth must lie in (0, 1)")
        if self.margin < 0:
            raise ValidationError("margin must be non-negative")
        if self.resampling != "bilinear":
            raise ValidationError(f"unsupported resampling {self.resampling!r}")
        if self.fade_frames is not None and self.fade_frames < 0:
            raise ValidationError("fade_frames must be non-negative")


def layout_viewports(layout: int, out_width: int, out_height: int) -> list[Viewport]:
    """Split the output into `layout` full-width bands, top to bottom.

    Heights follow a largest-remainder split and differ by at most one
    pixel; the union tiles the output exactly.
    """
    if not (1 <= layout <= 3):
        raise RenderError(f"layout must be 1..3, got {layout}")
    base, rem = divmod(out_height, layout)
    bands = []
    y = 0
    for i in range(layout):
        h = base + (1 if i < rem else 0)
        bands.append(Viewport(x=0, y=y, w=out_width, h=h))
        y += h
    return bands


def _clamped(cx: float, cy: float, w: float, h: float, src_w: int, src_h: int) -> CropWindow:
    # min() guards float noise from the uniform shrink; at most 1 ulp.
    w = min(w, float(src_w))
    h = min(h, float(src_h))
    cx = min(max(cx, w / 2.0), src_w - w / 2.0)
    cy = min(max(cy, h / 2.0), src_h - h / 2.0)
    return CropWindow(cx=cx, cy=cy, w=w, h=h)


def base_crop(
    bbox: BBox, sub_aspect: float, src_w: int, src_h: int, margin: float
) -> CropWindow:
    """Smallest window of `sub_aspect` covering the padded bbox.

    Padding adds `margin` times the bbox extent on each side.  The
    window is centered on the padded bbox, clamped into the source by
    translation (never by distorting the aspect), and shrunk uniformly
    only when it exceeds a source dimension.
    """
    if sub_aspect <= 0:
        raise RenderError("sub-window aspect must be positive")
    ew = bbox.width * (1.0 + 2.0 * margin)
    eh = bbox.height * (1.0 + 2.0 * margin)
    cx, cy = bbox.center

    if ew / eh >= sub_aspect:
        w = ew
    else:
        w = eh * sub_aspect
    h = w / sub_aspect

    if w > src_w or h > src_h:
        if src_w * h <= src_h * w:  # width is the binding constraint
            w = float(src_w)
            h = w / sub_aspect
        else:
            h = float(src_h)
            w = h * sub_aspect
    return _clamped(cx, cy, w, h, src_w, src_h)


def zoom_timeline(
    base: CropWindow,
    effect: EffectIn,
    scene_len: int,
    cfg: RenderConfig,
    src_w: int,
    src_h: int,
    anchor: tuple[float, float] | None = None,
) -> list[CropWindow]:
    """Per-frame windows scaling the base window linearly over the scene.

    The scale runs from 1.0 to zoom_depth for zoom_in and the reverse
    for zoom_out; without an effect every frame reuses the base window
    unchanged.  Scaling is anchored at `anchor` (the subject center,
    when the caller has one) so an edge-clamped window zooming in never
    drifts off its subject; the default anchor is the window's own
    center.  Every window is re-clamped into the source.
    """
    if scene_len < 1:
        raise RenderError("scene length must be >= 1")
    if effect == EffectIn.NONE:
        return [base] * scene_len
    ax, ay = anchor if anchor is not None else (base.cx, base.cy)
    if effect == EffectIn.ZOOM_IN:
        s0, s1 = 1.0, cfg.zoom_depth
    else:
        s0, s1 = cfg.zoom_depth, 1.0
    windows = []
    for t in range(scene_len):
        frac = t / (scene_len - 1) if scene_len > 1 else 0.0
        s = s0 + (s1 - s0) * frac
        windows.append(_clamped(ax, ay, base.w * s, base.h * s, src_w, src_h))
    return windows


def resolve_fade_frames(cfg: RenderConfig, scene_len: int) -> int:
    k = cfg.fade_frames if cfg.fade_frames is not None else min(15, scene_len // 4)
    return max(0, min(k, scene_len))


def fade_weights(effect: EffectTrans, scene_len: int, cfg: RenderConfig) -> list[float]:
    """Per-frame brightness weights in [0, 1]; 1.0 outside fade ramps.

    fade_out ramps the last frames linearly to an all-black final frame;
    fade_in is its mirror under frame-order reversal.
    """
    if scene_len < 1:
        raise RenderError("scene length must be >= 1")
    weights = [1.0] * scene_len
    k = resolve_fade_frames(cfg, scene_len)
    if k == 0 or effect == EffectTrans.NONE:
        return weights
    if effect == EffectTrans.FADE_OUT:
        for j in range(k):
            weights[scene_len - k + j] = (k - 1 - j) / k
    else:
        for j in range(k):
            weights[j] = j / k
    return weights


def scene_timeline(
    plan: ScenePlan,
    annotation: SceneAnnotation,
    scene_len: int,
    cfg: RenderConfig,
    src_w: int,
    src_h: int,
) -> CropTimeline:
    """Resolve a plan into per-frame, per-band crop windows plus fades."""
    bands = layout_viewports(plan.layout, cfg.out_width, cfg.out_height)
    per_band: list[list[CropWindow]] = []
    for oid, band in zip(plan.object_ids, bands):
        try:
            obj = annotation.find(oid)
        except KeyError:
            raise RenderError(
                f"scene {plan.scene_index}: object id {oid} missing from annotation"
            )
        base = base_crop(obj.bbox, band.aspect, src_w, src_h, cfg.margin)
        per_band.append(
            zoom_timeline(
                base, plan.effect_in, scene_len, cfg, src_w, src_h,
                anchor=obj.bbox.center,
            )
        )
    windows = tuple(
        tuple(per_band[b][t] for b in range(len(per_band)))
        for t in range(scene_len)
    )
    fades = tuple(fade_weights(plan.effect_trans, scene_len, cfg))
    return CropTimeline(scene_index=plan.scene_index, windows=windows, fades=fades)


def _sample_window(
    frame: np.ndarray, win: CropWindow, out_w: int, out_h: int
) -> np.ndarray:
    """Bilinear resample of a crop window onto an (out_h, out_w) grid."""
    src_h, src_w = frame.shape[:2]
    xs = win.x1 + (np.arange(out_w) + 0.5) * (win.w / out_w) - 0.5
    ys = win.y1 + (np.arange(out_h) + 0.5) * (win.h / out_h) - 0.5
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    x0c = np.clip(x0, 0, src_w - 1)
    x1c = np.clip(x0 + 1, 0, src_w - 1)
    y0c = np.clip(y0, 0, src_h - 1)
    y1c = np.clip(y0 + 1, 0, src_h - 1)
    f = frame.astype(np.float64)
    ia = f[np.ix_(y0c, x0c)]
    ib = f[np.ix_(y0c, x1c)]
    ic = f[np.ix_(y1c, x0c)]
    id_ = f[np.ix_(y1c, x1c)]
    return ia * (1 - fx) * (1 - fy) + ib * fx * (1 - fy) + ic * (1 - fx) * fy + id_ * fx * fy


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def render_scene(
    video: FrameSequence,
    scene: Scene,
    plan: ScenePlan,
    annotation: SceneAnnotation,
    cfg: RenderConfig,
) -> np.ndarray:
    """Render one scene to an (N, out_h, out_w, 3) uint8 array."""
    if plan.scene_index != scene.index or annotation.scene_index != scene.index:
        raise RenderError(
            f"plan/annotation/scene index mismatch at scene {scene.index}"
        )
    if plan.layout != len(plan.object_ids):
        raise RenderError(
            f"scene {scene.index}: layout {plan.layout} does not match "
            f"{len(plan.object_ids)} object ids"
        )
    scene_len = len(scene)
    timeline = scene_timeline(
        plan, annotation, scene_len, cfg, video.width, video.height
    )
    bands = layout_viewports(plan.layout, cfg.out_width, cfg.out_height)
    out = np.empty((scene_len, cfg.out_height, cfg.out_width, 3), dtype=np.uint8)
    for t in range(scene_len):
        frame = video.frames[scene.start + t]
        canvas = np.empty((cfg.out_height, cfg.out_width, 3), dtype=np.float64)
        for band, win in zip(bands, timeline.windows[t]):
            canvas[band.y : band.y + band.h, band.x : band.x + band.w] = \
                _sample_window(frame, win, band.w, band.h)
        out[t] = _to_uint8(canvas * timeline.fades[t])
    return out


def render_video(
    video: FrameSequence,
    blueprint: Blueprint,
    annotations: Sequence[SceneAnnotation],
    scenes: Sequence[Scene],
    cfg: RenderConfig,
    jobs: int = 1,
) -> FrameSequence:
    """Execute a full blueprint; output frame count equals the input's."""
    violations = validate_blueprint(blueprint, annotations, scenes)
    if violations:
        detail = "; ".join(f"scene {v.scene_index} {v.field}: {v.message}" for v in violations)
        raise RenderError(f"blueprint fails validation: {detail}")
    if scenes[-1].end != len(video):
        raise RenderError("scene partition does not cover the video")
    ann_by_scene = {a.scene_index: a for a in annotations}

    def _one(scene: Scene) -> np.ndarray:
        return render_scene(
            video, scene, blueprint.plan_for(scene.index), ann_by_scene[scene.index], cfg
        )

    ordered = sorted(scenes, key=lambda s: s.index)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_one, ordered))
    else:
        chunks = [_one(s) for s in ordered]
    return FrameSequence(
        width=cfg.out_width,
        height=cfg.out_height,
        fps=video.fps,
        frames=np.concatenate(chunks, axis=0),
    )


def portrait_dims(src_w: int, src_h: int, aspect: AspectRatio) -> tuple[int, int]:
    """Height-preserving output size for a portrait-or-equal target.

    Width is round-half-to-even of height times the aspect; targets
    wider than the source are rejected (no padding support).
    """
    width = round(src_h * aspect.w / aspect.h)
    if width > src_w:
        raise RenderError(
            f"target aspect {aspect} is wider than the source ({src_w}x{src_h})"
        )
    return max(1, width), src_h


def center_cut(video: FrameSequence, aspect: AspectRatio) -> FrameSequence:
    """Baseline: fixed centered window at full source height, no effects."""
    cw, _ = portrait_dims(video.width, video.height, aspect)
    x0 = round((video.width - cw) / 2.0)
    frames = np.ascontiguousarray(video.frames[:, :, x0 : x0 + cw, :])
    return FrameSequence(width=cw, height=video.height, fps=video.fps, frames=frames)


def project_to_viewport(
    win: CropWindow, band: Viewport, point: tuple[float, float]
) -> tuple[float, float]:
    """Map a source-space point through a crop window into its viewport."""
    px, py = point
    return (
        band.x + (px - win.x1) / win.w * band.w,
        band.y + (py - win.y1) / win.h * band.h,
    )
