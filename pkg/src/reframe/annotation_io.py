"""Serialization for annotations, blueprints and scene lists.

All documents are UTF-8 JSON written in a canonical form: sorted keys,
compact separators, floats quantized to 4 decimal places with
round-half-up.  Canonical output is byte-stable across runs and a
fixpoint of serialize-parse-serialize.  Loaders reject unknown fields
and report violations with a path into the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Sequence

import numpy as np

from .model import (
    AnnotationFile,
    AspectRatio,
    BBox,
    Blueprint,
    Mask,
    ObjectRecord,
    ReframeError,
    Scene,
    SceneAnnotation,
    ScenePlan,
    ValidationError,
    check_scene_partition,
)


class AnnotationFormatError(ReframeError):
    """A document failed schema or invariant checks; carries the JSON path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero upward."""
    return int(Decimal(repr(float(x))).quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def _quantize(x: float) -> float:
    return float(
        Decimal(repr(float(x))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP)
    )


def _canonical(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return _quantize(value)
    return value


def canonical_dumps(obj: Any) -> bytes:
    """Serialize to canonical JSON bytes (sorted keys, 4-decimal floats)."""
    text = json.dumps(_canonical(obj), sort_keys=True, separators=(",", ":"))
    return (text + "\n").encode("utf-8")


# --- run-length codec -------------------------------------------------------

def encode_rle(grid: np.ndarray) -> list[int]:
    """Encode a binary grid as column-major runs, zero-run first."""
    return list(Mask.from_array(np.asarray(grid)).runs)


def decode_rle(runs: Sequence[int], width: int, height: int) -> np.ndarray:
    """Decode column-major runs back to an (height, width) uint8 grid."""
    return Mask(width=width, height=height, runs=tuple(int(r) for r in runs)).to_array()


# --- low-level document access ----------------------------------------------

def _loads(data: bytes | str) -> Any:
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise AnnotationFormatError("$", f"invalid JSON: {exc}") from exc


def _require_keys(obj: Any, path: str, keys: set[str]) -> dict:
    if not isinstance(obj, dict):
        raise AnnotationFormatError(path, "expected an object")
    missing = keys - obj.keys()
    if missing:
        raise AnnotationFormatError(path, f"missing field {sorted(missing)[0]!r}")
    unknown = obj.keys() - keys
    if unknown:
        raise AnnotationFormatError(path, f"unknown field {sorted(unknown)[0]!r}")
    return obj


def _get_str(obj: dict, key: str, path: str) -> str:
    v = obj[key]
    if not isinstance(v, str):
        raise AnnotationFormatError(f"{path}.{key}", "expected a string")
    return v


def _get_int(obj: dict, key: str, path: str) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise AnnotationFormatError(f"{path}.{key}", "expected an integer")
    return v


def _get_number(obj: dict, key: str, path: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise AnnotationFormatError(f"{path}.{key}", "expected a number")
    return float(v)


def _get_list(obj: dict, key: str, path: str) -> list:
    v = obj[key]
    if not isinstance(v, list):
        raise AnnotationFormatError(f"{path}.{key}", "expected a list")
    return v


# --- annotation files -------------------------------------------------------

_ANNOTATION_KEYS = {"video_id", "width", "height", "fps", "scenes"}
_SCENE_KEYS = {"scene_index", "start", "end", "keyframe", "objects"}
_OBJECT_KEYS = {"id", "caption", "bbox", "mask_rle"}


def load_annotations(data: bytes | str) -> AnnotationFile:
    """Parse and validate an annotation document."""
    doc = _require_keys(_loads(data), "$", _ANNOTATION_KEYS)
    video_id = _get_str(doc, "video_id", "$")
    width = _get_int(doc, "width", "$")
    height = _get_int(doc, "height", "$")
    fps = _get_number(doc, "fps", "$")

    scenes: list[Scene] = []
    annotations: list[SceneAnnotation] = []
    for i, entry in enumerate(_get_list(doc, "scenes", "$")):
        p = f"scenes[{i}]"
        entry = _require_keys(entry, p, _SCENE_KEYS)
        try:
            scene = Scene(
                index=_get_int(entry, "scene_index", p),
                start=_get_int(entry, "start", p),
                end=_get_int(entry, "end", p),
            )
        except ValidationError as exc:
            raise AnnotationFormatError(p, str(exc)) from exc
        keyframe = _get_int(entry, "keyframe", p)

        objects: list[ObjectRecord] = []
        for j, ob in enumerate(_get_list(entry, "objects", p)):
            po = f"{p}.objects[{j}]"
            ob = _require_keys(ob, po, _OBJECT_KEYS)
            coords = _get_list(ob, "bbox", po)
            if len(coords) != 4 or not all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in coords
            ):
                raise AnnotationFormatError(f"{po}.bbox", "expected [x1, y1, x2, y2]")
            runs = _get_list(ob, "mask_rle", po)
            if not all(isinstance(r, int) and not isinstance(r, bool) for r in runs):
                raise AnnotationFormatError(f"{po}.mask_rle", "expected integer run counts")
            try:
                mask = Mask(width=width, height=height, runs=tuple(runs))
            except ValidationError as exc:
                raise AnnotationFormatError(f"{po}.mask_rle", str(exc)) from exc
            try:
                bbox = BBox(*(float(c) for c in coords))
            except ValidationError as exc:
                raise AnnotationFormatError(f"{po}.bbox", str(exc)) from exc
            try:
                objects.append(
                    ObjectRecord(
                        id=_get_int(ob, "id", po),
                        caption=_get_str(ob, "caption", po),
                        bbox=bbox,
                        mask=mask,
                    )
                )
            except ValidationError as exc:
                raise AnnotationFormatError(po, str(exc)) from exc

        try:
            annotations.append(
                SceneAnnotation(
                    scene_index=scene.index, keyframe=keyframe, objects=tuple(objects)
                )
            )
        except ValidationError as exc:
            raise AnnotationFormatError(p, str(exc)) from exc
        scenes.append(scene)

    try:
        return AnnotationFile(
            video_id=video_id,
            width=width,
            height=height,
            fps=fps,
            scenes=tuple(scenes),
            annotations=tuple(annotations),
        )
    except ReframeError as exc:
        raise AnnotationFormatError("$", str(exc)) from exc


def save_annotations(af: AnnotationFile) -> bytes:
    """Serialize an annotation file to canonical JSON bytes."""
    doc = {
        "video_id": af.video_id,
        "width": af.width,
        "height": af.height,
        "fps": float(af.fps),
        "scenes": [
            {
                "scene_index": scene.index,
                "start": scene.start,
                "end": scene.end,
                "keyframe": ann.keyframe,
                "objects": [
                    {
                        "id": o.id,
                        "caption": o.caption,
                        "bbox": [float(c) for c in o.bbox.as_tuple()],
                        "mask_rle": list(o.mask.runs),
                    }
                    for o in ann.objects
                ],
            }
            for scene, ann in zip(af.scenes, af.annotations)
        ],
    }
    return canonical_dumps(doc)


# --- blueprint files --------------------------------------------------------

_BLUEPRINT_KEYS = {"video_id", "plans"}
_PLAN_KEYS = {"scene_index", "layout", "object_ids", "effect_in", "effect_trans", "aspect"}


def load_blueprint(data: bytes | str) -> Blueprint:
    """Parse and validate a blueprint document."""
    doc = _require_keys(_loads(data), "$", _BLUEPRINT_KEYS)
    video_id = _get_str(doc, "video_id", "$")
    plans: list[ScenePlan] = []
    for i, entry in enumerate(_get_list(doc, "plans", "$")):
        p = f"plans[{i}]"
        entry = _require_keys(entry, p, _PLAN_KEYS)
        ids = _get_list(entry, "object_ids", p)
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in ids):
            raise AnnotationFormatError(f"{p}.object_ids", "expected integer ids")
        try:
            plans.append(
                ScenePlan(
                    scene_index=_get_int(entry, "scene_index", p),
                    layout=_get_int(entry, "layout", p),
                    object_ids=tuple(ids),
                    effect_in=_get_str(entry, "effect_in", p),
                    effect_trans=_get_str(entry, "effect_trans", p),
                    aspect=AspectRatio.parse(_get_str(entry, "aspect", p)),
                )
            )
        except (ValidationError, ValueError) as exc:
            raise AnnotationFormatError(p, str(exc)) from exc
    return Blueprint(video_id=video_id, plans=tuple(plans))


def save_blueprint(bp: Blueprint) -> bytes:
    """Serialize a blueprint to canonical JSON bytes."""
    doc = {
        "video_id": bp.video_id,
        "plans": [
            {
                "scene_index": p.scene_index,
                "layout": p.layout,
                "object_ids": list(p.object_ids),
                "effect_in": p.effect_in.value,
                "effect_trans": p.effect_trans.value,
                "aspect": str(p.aspect),
            }
            for p in bp.plans
        ],
    }
    return canonical_dumps(doc)


# --- scene list files -------------------------------------------------------

@dataclass(frozen=True)
class ScenesFile:
    """Scene partition of a video, as written by the detection stage."""

    video_id: str
    width: int
    height: int
    fps: float
    scenes: tuple[Scene, ...]

    def __post_init__(self) -> None:
        check_scene_partition(self.scenes, self.frame_count)

    @property
    def frame_count(self) -> int:
        return self.scenes[-1].end


_SCENES_FILE_KEYS = {"video_id", "width", "height", "fps", "frame_count", "scenes"}
_SCENE_ENTRY_KEYS = {"index", "start", "end"}


def load_scenes(data: bytes | str) -> ScenesFile:
    doc = _require_keys(_loads(data), "$", _SCENES_FILE_KEYS)
    scenes = []
    for i, entry in enumerate(_get_list(doc, "scenes", "$")):
        p = f"scenes[{i}]"
        entry = _require_keys(entry, p, _SCENE_ENTRY_KEYS)
        try:
            scenes.append(
                Scene(
                    index=_get_int(entry, "index", p),
                    start=_get_int(entry, "start", p),
                    end=_get_int(entry, "end", p),
                )
            )
        except ValidationError as exc:
            raise AnnotationFormatError(p, str(exc)) from exc
    try:
        sf = ScenesFile(
            video_id=_get_str(doc, "video_id", "$"),
            width=_get_int(doc, "width", "$"),
            height=_get_int(doc, "height", "$"),
            fps=_get_number(doc, "fps", "$"),
            scenes=tuple(scenes),
        )
    except ReframeError as exc:
        raise AnnotationFormatError("$", str(exc)) from exc
    if sf.frame_count != _get_int(doc, "frame_count", "$"):
        raise AnnotationFormatError(
            "$.frame_count", "does not match the end of the last scene"
        )
    return sf


def save_scenes(sf: ScenesFile) -> bytes:
    doc = {
        "video_id": sf.video_id,
        "width": sf.width,
        "height": sf.height,
        "fps": float(sf.fps),
        "frame_count": sf.frame_count,
        "scenes": [
            {"index": s.index, "start": s.start, "end": s.end} for s in sf.scenes
        ],
    }
    return canonical_dumps(doc)


# --- scene descriptions ------------------------------------------------------

@dataclass(frozen=True)
class SceneDescription:
    """Textual rendering of one scene's objects, one line per object."""

    scene_index: int
    text: str


def describe_scene(sa: SceneAnnotation) -> SceneDescription:
    """Render `Scene-<k>: Object-<i>: <caption> at [x1,y1,x2,y2]` lines.

    Objects appear in ascending id order; coordinates are rounded
    half-up to integers.
    """
    lines = []
    for o in sorted(sa.objects, key=lambda o: o.id):
        x1, y1, x2, y2 = (round_half_up(c) for c in o.bbox.as_tuple())
        lines.append(
            f"Scene-{sa.scene_index}: Object-{o.id}: {o.caption} at [{x1},{y1},{x2},{y2}]"
        )
    return SceneDescription(scene_index=sa.scene_index, text="\n".join(lines))
