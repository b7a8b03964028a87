"""Keyframe grounding pass and annotation JSON writer."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np
from PIL import Image

from .adapters import SCORERS, SEGMENTERS, TAGGERS

log = logging.getLogger("annotation_exporter")


class ExporterError(Exception):
    """Base class for exporter failures."""


class ModelLoadError(ExporterError):
    """A configured model could not be resolved or instantiated."""


@dataclass(frozen=True)
class ExporterConfig:
    """Model identifiers, device, and the detection confidence floor."""

    tagger: str = "color-blob"
    segmenter: str = "color-region"
    scorer: str = "position-template"
    device: str = "cpu"
    confidence_threshold: float = 0.3

    def __post_init__(self) -> None:
        if not (0.0 < self.confidence_threshold < 1.0):
            raise ExporterError("confidence threshold must lie in (0, 1)")


def _resolve(registry: dict, name: str, kind: str):
    try:
        factory = registry[name]
    except KeyError:
        raise ModelLoadError(
            f"cannot load {kind} model {name!r}; available: {sorted(registry)}"
        )
    return factory()


def load_models(config: ExporterConfig):
    return (
        _resolve(TAGGERS, config.tagger, "tagger"),
        _resolve(SEGMENTERS, config.segmenter, "segmenter"),
        _resolve(SCORERS, config.scorer, "scorer"),
    )


# --- pipeline file interfaces -------------------------------------------------

def read_scenes_file(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("video_id", "width", "height", "fps", "frame_count", "scenes"):
        if key not in doc:
            raise ExporterError(f"scenes file missing field {key!r}")
    return doc


def read_frame(frames_dir: str | Path, index: int) -> np.ndarray:
    paths = sorted(Path(frames_dir).glob("*.png"))
    if not paths:
        raise ExporterError(f"no PNG frames under {frames_dir}")
    if index >= len(paths):
        raise ExporterError(f"keyframe {index} beyond the {len(paths)} frames on disk")
    with Image.open(paths[index]) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def encode_mask(mask: np.ndarray) -> list[int]:
    """Column-major alternating zero/one run counts, zero-run first."""
    bits = (np.asarray(mask) != 0).astype(np.uint8).flatten(order="F")
    change = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate(([0], change))
    runs = np.diff(np.concatenate((starts, [bits.size]))).tolist()
    if bits[0] == 1:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def decode_mask(runs: list[int], width: int, height: int) -> np.ndarray:
    flat = np.repeat(np.arange(len(runs), dtype=np.uint8) % 2, runs)
    return flat.reshape((width, height)).T


def tight_bbox(mask: np.ndarray) -> list[float]:
    ys, xs = np.nonzero(mask)
    return [float(xs.min()), float(ys.min()), float(xs.max()) + 1.0, float(ys.max()) + 1.0]


def _q4(x: float) -> float:
    return float(Decimal(repr(float(x))).quantize(Decimal("0.0001"),
                                                  rounding=ROUND_HALF_UP))


def _canonical(value):
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return _q4(value)
    return value


def dumps_canonical(doc: dict) -> bytes:
    return (json.dumps(_canonical(doc), sort_keys=True, separators=(",", ":")) + "\n").encode()


# --- export pass ---------------------------------------------------------------

def annotate_keyframe(image: np.ndarray, models, threshold: float) -> list[dict]:
    """Ground every tag on one keyframe into object records."""
    tagger, segmenter, scorer = models
    objects = []
    next_id = 1
    for tag in tagger.tag(image):
        for detection in segmenter.ground(image, tag):
            if detection.confidence < threshold:
                log.info("dropping %r detection below threshold (%.3f)",
                         tag, detection.confidence)
                continue
            caption, _ = scorer.caption(image, detection.mask, tag)
            objects.append(
                {
                    "id": next_id,
                    "caption": caption,
                    "bbox": tight_bbox(detection.mask),
                    "mask_rle": encode_mask(detection.mask),
                }
            )
            next_id += 1
    return objects


def export_annotations(
    frames_dir: str | Path,
    scenes_path: str | Path,
    config: ExporterConfig,
    out_path: str | Path,
) -> Path:
    """Annotate every scene keyframe and write the annotation document."""
    models = load_models(config)
    scenes = read_scenes_file(scenes_path)

    entries = []
    for scene in sorted(scenes["scenes"], key=lambda s: s["index"]):
        keyframe = (scene["start"] + scene["end"]) // 2
        image = read_frame(frames_dir, keyframe)
        if image.shape[:2] != (scenes["height"], scenes["width"]):
            raise ExporterError(
                f"frame {keyframe} is {image.shape[1]}x{image.shape[0]}, "
                f"scenes file says {scenes['width']}x{scenes['height']}"
            )
        objects = annotate_keyframe(image, models, config.confidence_threshold)
        if not objects:
            log.warning("scene %d: no objects above threshold; emitting empty list",
                        scene["index"])
        entries.append(
            {
                "scene_index": scene["index"],
                "start": scene["start"],
                "end": scene["end"],
                "keyframe": keyframe,
                "objects": objects,
            }
        )

    doc = {
        "video_id": scenes["video_id"],
        "width": scenes["width"],
        "height": scenes["height"],
        "fps": float(scenes["fps"]),
        "scenes": entries,
    }
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(dumps_canonical(doc))
    return out
