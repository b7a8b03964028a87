"""Shared domain types for the reframing pipeline.

Every stage exchanges the value objects defined here: frame buffers,
scene partitions, object annotations, execution blueprints, and metric
reports.  All types are immutable and validated on construction; pixel
math lives in the stage modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class ReframeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ReframeError):
    """A domain invariant was violated at construction time."""


class DimensionMismatchError(ReframeError):
    """Two buffers that must share dimensions do not."""

    def __init__(self, expected: tuple, actual: tuple, what: str = "buffer"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} dimensions {actual} do not match expected {expected}")


@dataclass(frozen=True)
class FrameSequence:
    """An in-memory RGB video: an (N, H, W, 3) uint8 array plus frame rate.

    The frame buffer is marked read-only on construction so instances can
    be shared freely between threads.
    """

    width: int
    height: int
    fps: float
    frames: np.ndarray

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("frame dimensions must be positive")
        if self.fps <= 0:
            raise ValidationError("fps must be positive")
        f = self.frames
        if not isinstance(f, np.ndarray) or f.ndim != 4 or f.shape[3] != 3:
            raise ValidationError("frames must be an (N, H, W, 3) array")
        if f.dtype != np.uint8:
            raise ValidationError("frames must be 8-bit per channel (uint8)")
        if f.shape[0] < 1:
            raise ValidationError("frame count must be >= 1")
        if f.shape[1] != self.height or f.shape[2] != self.width:
            raise DimensionMismatchError(
                (self.height, self.width), f.shape[1:3], "frame"
            )
        f.setflags(write=False)

    @classmethod
    def from_frames(
        cls, frames: Sequence[np.ndarray] | np.ndarray, fps: float = 30.0
    ) -> "FrameSequence":
        arr = np.stack([np.asarray(fr, dtype=np.uint8) for fr in frames]) \
            if not isinstance(frames, np.ndarray) else np.array(frames, dtype=np.uint8)
        if arr.ndim != 4:
            raise ValidationError("expected a sequence of (H, W, 3) frames")
        return cls(width=int(arr.shape[2]), height=int(arr.shape[1]), fps=fps, frames=arr)

    def __len__(self) -> int:
        return int(self.frames.shape[0])

    def frame(self, i: int) -> np.ndarray:
        return self.frames[i]


@dataclass(frozen=True, order=True)
class Scene:
    """A half-open frame interval [start, end) produced by shot detection."""

    index: int
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValidationError("scene index must be non-negative")
        if not (0 <= self.start < self.end):
            raise ValidationError(
                f"scene {self.index}: require 0 <= start < end, got [{self.start}, {self.end})"
            )

    def __len__(self) -> int:
        return self.end - self.start


def check_scene_partition(scenes: Sequence[Scene], frame_count: int) -> None:
    """Require that `scenes` tile [0, frame_count) with consecutive indices."""
    if not scenes:
        raise ValidationError("scene list is empty")
    if scenes[0].start != 0:
        raise ValidationError("first scene must start at frame 0")
    for pos, sc in enumerate(scenes):
        if sc.index != pos:
            raise ValidationError(f"scene at position {pos} has index {sc.index}")
        if pos and sc.start != scenes[pos - 1].end:
            raise ValidationError(
                f"gap or overlap between scenes {pos - 1} and {pos}"
            )
    if scenes[-1].end != frame_count:
        raise ValidationError(
            f"scenes end at {scenes[-1].end}, expected frame count {frame_count}"
        )


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, xyxy, floats."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (0 <= self.x1 < self.x2 and 0 <= self.y1 < self.y2):
            raise ValidationError(
                f"bbox requires 0 <= x1 < x2 and 0 <= y1 < y2, got {self.as_tuple()}"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    @property
    def area(self) -> float:
        return self.width * self.height

    def within(self, width: float, height: float) -> bool:
        return self.x2 <= width and self.y2 <= height


@dataclass(frozen=True)
class Mask:
    """Binary segmentation mask as column-major run-length counts.

    Runs alternate zero/one and start with a zero run, which may be
    empty.  The counts always sum to width*height.
    """

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("mask dimensions must be positive")
        if any(r < 0 for r in self.runs):
            raise ValidationError("run counts must be non-negative")
        total = sum(self.runs)
        if total != self.width * self.height:
            raise ValidationError(
                f"run counts sum to {total}, expected {self.width * self.height}"
            )

    @classmethod
    def from_array(cls, grid: np.ndarray) -> "Mask":
        g = np.asarray(grid)
        if g.ndim != 2 or g.size == 0:
            raise ValidationError("mask grid must be a non-empty 2-D array")
        bits = (g != 0).astype(np.uint8).flatten(order="F")
        change = np.flatnonzero(np.diff(bits)) + 1
        starts = np.concatenate(([0], change))
        lengths = np.diff(np.concatenate((starts, [bits.size])))
        runs = [int(n) for n in lengths]
        if bits[0] == 1:
            runs.insert(0, 0)
        h, w = g.shape
        return cls(width=w, height=h, runs=tuple(runs))

    def to_array(self) -> np.ndarray:
        values = np.arange(len(self.runs), dtype=np.uint8) % 2
        flat = np.repeat(values, self.runs)
        return flat.reshape((self.width, self.height)).T

    def foreground_count(self) -> int:
        return sum(r for i, r in enumerate(self.runs) if i % 2 == 1)

    def tight_bbox(self) -> BBox:
        grid = self.to_array()
        ys, xs = np.nonzero(grid)
        if xs.size == 0:
            raise ValidationError("mask has no foreground pixels")
        return BBox(
            x1=float(xs.min()),
            y1=float(ys.min()),
            x2=float(xs.max()) + 1.0,
            y2=float(ys.max()) + 1.0,
        )


#: Tolerance, in pixels per edge, between a declared bbox and the tight
#: box of its mask.
BBOX_TOLERANCE_PX = 1.0


@dataclass(frozen=True)
class ObjectRecord:
    """One grounded object: caption plus mask plus bounding box."""

    id: int
    caption: str
    bbox: BBox
    mask: Mask

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValidationError("object id must be non-negative")
        tight = self.mask.tight_bbox()
        for name, got, want in zip(
            ("x1", "y1", "x2", "y2"), self.bbox.as_tuple(), tight.as_tuple()
        ):
            if abs(got - want) > BBOX_TOLERANCE_PX:
                raise ValidationError(
                    f"object {self.id}: bbox.{name}={got} is further than "
                    f"{BBOX_TOLERANCE_PX}px from the mask's tight box ({name}={want})"
                )


@dataclass(frozen=True)
class SceneAnnotation:
    """Object records extracted from one scene's keyframe."""

    scene_index: int
    keyframe: int
    objects: tuple[ObjectRecord, ...]

    def __post_init__(self) -> None:
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValidationError(
                f"scene {self.scene_index}: object ids are not unique: {ids}"
            )

    def object_ids(self) -> tuple[int, ...]:
        return tuple(o.id for o in self.objects)

    def find(self, object_id: int) -> ObjectRecord:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)


@dataclass(frozen=True)
class AspectRatio:
    """Target aspect ratio as a reduced integer fraction w:h."""

    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValidationError("aspect ratio terms must be positive integers")
        g = math.gcd(self.w, self.h)
        object.__setattr__(self, "w", self.w // g)
        object.__setattr__(self, "h", self.h // g)

    @classmethod
    def parse(cls, text: str) -> "AspectRatio":
        parts = text.strip().split(":")
        if len(parts) != 2:
            raise ValidationError(f"aspect ratio must look like 'W:H', got {text!r}")
        try:
            w, h = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValidationError(f"aspect ratio terms must be integers: {text!r}") from exc
        return cls(w, h)

    def as_float(self) -> float:
        return self.w / self.h

    def __str__(self) -> str:
        return f"{self.w}:{self.h}"


class EffectIn(str, Enum):
    """Effect applied within a scene."""

    ZOOM_IN = "zoom_in"
    ZOOM_OUT = "zoom_out"
    NONE = "none"


class EffectTrans(str, Enum):
    """Effect applied at the end of a scene, into the next."""

    FADE_IN = "fade_in"
    FADE_OUT = "fade_out"
    NONE = "none"


#: Largest number of stacked sub-windows a plan may request.
MAX_LAYOUT = 3


@dataclass(frozen=True)
class ScenePlan:
    """Per-scene entry of an execution blueprint.

    Cross-invariants (layout matches the id count, ids exist in the
    scene's annotation) are checked by :func:`validate_blueprint` so
    that malformed plans can be represented and reported as data.
    """

    scene_index: int
    layout: int
    object_ids: tuple[int, ...]
    effect_in: EffectIn
    effect_trans: EffectTrans
    aspect: AspectRatio

    def __post_init__(self) -> None:
        if self.scene_index < 0:
            raise ValidationError("scene_index must be non-negative")
        if not isinstance(self.layout, int) or self.layout < 1:
            raise ValidationError("layout must be a positive integer")
        object.__setattr__(self, "object_ids", tuple(int(i) for i in self.object_ids))
        object.__setattr__(self, "effect_in", EffectIn(self.effect_in))
        object.__setattr__(self, "effect_trans", EffectTrans(self.effect_trans))


@dataclass(frozen=True)
class Blueprint:
    """The full structured execution plan for one video."""

    video_id: str
    plans: tuple[ScenePlan, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "plans", tuple(sorted(self.plans, key=lambda p: p.scene_index))
        )

    def plan_for(self, scene_index: int) -> ScenePlan:
        for p in self.plans:
            if p.scene_index == scene_index:
                return p
        raise KeyError(scene_index)


@dataclass(frozen=True)
class SceneDetectConfig:
    """Cut threshold (0-255 content score) and minimum scene length."""

    alpha1: float
    alpha2: int

    def __post_init__(self) -> None:
        if not (0 < self.alpha1 <= 255):
            raise ValidationError("alpha1 must lie in (0, 255]")
        if self.alpha2 < 1:
            raise ValidationError("alpha2 must be >= 1 frame")


@dataclass(frozen=True)
class MetricReport:
    """Saliency evaluation summary over a frame sequence pair."""

    mae: float
    max_f: float
    max_e: float
    s_m: float
    frame_count: int

    def __post_init__(self) -> None:
        for name in ("mae", "max_f", "max_e", "s_m"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name}={v} outside [0, 1]")
        if self.frame_count < 1:
            raise ValidationError("frame_count must be >= 1")


@dataclass(frozen=True, order=True)
class Violation:
    """One blueprint consistency failure; data, not an exception."""

    scene_index: int
    field: str
    message: str


def validate_blueprint(
    bp: Blueprint,
    annotations: Sequence[SceneAnnotation],
    scenes: Sequence[Scene],
) -> list[Violation]:
    """Check a blueprint against a scene partition and its annotations.

    Returns an empty list iff every plan invariant holds: plans cover
    each scene exactly once, layouts are within range and match the id
    count, and every referenced object id exists in the matching scene
    annotation.  The result is sorted, so it is deterministic and
    independent of plan order.
    """
    violations: set[Violation] = set()
    ann_by_scene = {a.scene_index: a for a in annotations}
    scene_indices = {s.index for s in scenes}

    seen: dict[int, int] = {}
    for plan in bp.plans:
        seen[plan.scene_index] = seen.get(plan.scene_index, 0) + 1

    for idx in sorted(scene_indices):
        if idx not in seen:
            violations.add(Violation(idx, "plans", f"no plan for scene {idx}"))
    for idx, count in seen.items():
        if idx not in scene_indices:
            violations.add(
                Violation(idx, "scene_index", f"plan references unknown scene {idx}")
            )
        if count > 1:
            violations.add(
                Violation(idx, "plans", f"scene {idx} planned {count} times")
            )

    for plan in bp.plans:
        idx = plan.scene_index
        if plan.layout > MAX_LAYOUT:
            violations.add(
                Violation(idx, "layout", f"layout {plan.layout} exceeds maximum {MAX_LAYOUT}")
            )
        if plan.layout != len(plan.object_ids):
            violations.add(
                Violation(
                    idx,
                    "layout",
                    f"layout {plan.layout} does not match {len(plan.object_ids)} object ids",
                )
            )
        ann = ann_by_scene.get(idx)
        if ann is None:
            if idx in scene_indices:
                violations.add(
                    Violation(idx, "object_ids", f"scene {idx} has no annotation")
                )
            continue
        known = set(ann.object_ids())
        for oid in plan.object_ids:
            if oid not in known:
                violations.add(
                    Violation(
                        idx,
                        "object_ids",
                        f"object id {oid} not present in scene {idx} annotation",
                    )
                )
    return sorted(violations)


@dataclass(frozen=True)
class AnnotationFile:
    """Parsed contents of an annotation document.

    Couples the scene partition with the per-scene object records and
    the frame geometry they were grounded on.
    """

    video_id: str
    width: int
    height: int
    fps: float
    scenes: tuple[Scene, ...]
    annotations: tuple[SceneAnnotation, ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("annotation header dimensions must be positive")
        if self.fps <= 0:
            raise ValidationError("fps must be positive")
        if len(self.scenes) != len(self.annotations):
            raise ValidationError("one annotation required per scene")
        check_scene_partition(self.scenes, self.scenes[-1].end if self.scenes else 0)
        for scene, ann in zip(self.scenes, self.annotations):
            if ann.scene_index != scene.index:
                raise ValidationError(
                    f"annotation index {ann.scene_index} does not match scene {scene.index}"
                )
            if not (scene.start <= ann.keyframe < scene.end):
                raise ValidationError(
                    f"scene {scene.index}: keyframe {ann.keyframe} outside [{scene.start}, {scene.end})"
                )
            for obj in ann.objects:
                if (obj.mask.width, obj.mask.height) != (self.width, self.height):
                    raise DimensionMismatchError(
                        (self.width, self.height),
                        (obj.mask.width, obj.mask.height),
                        f"scene {scene.index} object {obj.id} mask",
                    )
                if not obj.bbox.within(self.width, self.height):
                    raise ValidationError(
                        f"scene {scene.index} object {obj.id}: bbox exceeds frame bounds"
                    )

    @property
    def frame_count(self) -> int:
        return self.scenes[-1].end

    def annotation_for(self, scene_index: int) -> SceneAnnotation:
        for ann in self.annotations:
            if ann.scene_index == scene_index:
                return ann
        raise KeyError(scene_index)
