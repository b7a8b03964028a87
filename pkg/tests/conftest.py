"""Shared fixture builders for synthetic videos and annotations."""

from __future__ import annotations

import numpy as np
import pytest

from reframe.model import (
    AnnotationFile,
    BBox,
    Mask,
    ObjectRecord,
    Scene,
    SceneAnnotation,
)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {name}: {outcome}")


def solid_video(colors, lengths, width=64, height=36, fps=30.0):
    """Constant-color segments concatenated into one frame array."""
    frames = []
    for color, n in zip(colors, lengths):
        frames.extend([np.full((height, width, 3), color, dtype=np.uint8)] * n)
    return np.stack(frames), fps


def rect_mask(width, height, x1, y1, x2, y2):
    grid = np.zeros((height, width), dtype=np.uint8)
    grid[y1:y2, x1:x2] = 1
    return grid


def rect_object(oid, caption, width, height, x1, y1, x2, y2):
    """Object whose bbox is exactly the tight box of a rectangle mask."""
    return ObjectRecord(
        id=oid,
        caption=caption,
        bbox=BBox(float(x1), float(y1), float(x2), float(y2)),
        mask=Mask.from_array(rect_mask(width, height, x1, y1, x2, y2)),
    )


def paint_rect(frames, x1, y1, x2, y2, color, start=None, end=None):
    frames[slice(start, end), y1:y2, x1:x2] = color
    return frames


def build_two_scene_project(root, width=64, height=36, scene_frames=(40, 40), fps=30.0):
    """Painted 2-scene clip plus matching annotation file, written to disk.

    Scene 0 holds a near-center target and a small corner distractor;
    scene 1 holds a single object.  Returns paths and the parsed file.
    """
    from reframe.annotation_io import save_annotations
    from reframe.frame_io import write_frame_dir
    from reframe.model import AnnotationFile

    def rect(fx1, fy1, fx2, fy2):
        x1, y1 = int(round(width * fx1)), int(round(height * fy1))
        x2, y2 = int(round(width * fx2)), int(round(height * fy2))
        return x1, y1, max(x2, x1 + 1), max(y2, y1 + 1)

    n0, n1 = scene_frames
    target0 = rect(0.3125, 0.28, 0.625, 0.80)
    distract0 = rect(0.03, 0.05, 0.15, 0.22)
    target1 = rect(0.35, 0.20, 0.70, 0.75)

    frames = np.full((n0 + n1, height, width, 3), (70, 90, 70), dtype=np.uint8)
    frames[n0:] = (60, 60, 90)
    paint_rect(frames, *target0, color=(200, 40, 60), end=n0)
    paint_rect(frames, *distract0, color=(120, 120, 130), end=n0)
    paint_rect(frames, *target1, color=(190, 150, 80), start=n0)

    af = AnnotationFile(
        video_id="two-scene",
        width=width,
        height=height,
        fps=fps,
        scenes=(Scene(0, 0, n0), Scene(1, n0, n0 + n1)),
        annotations=(
            SceneAnnotation(
                scene_index=0,
                keyframe=n0 // 2,
                objects=(
                    rect_object(1, "a dancer in a red dress", width, height, *target0),
                    rect_object(2, "a parked gray van", width, height, *distract0),
                ),
            ),
            SceneAnnotation(
                scene_index=1,
                keyframe=n0 + n1 // 2,
                objects=(
                    rect_object(1, "a golden retriever", width, height, *target1),
                ),
            ),
        ),
    )
    frames_dir = root / "frames"
    write_frame_dir(frames, frames_dir)
    annotations_path = root / "annotations.json"
    annotations_path.write_bytes(save_annotations(af))
    return {"frames_dir": frames_dir, "annotations": annotations_path, "file": af}


def build_identity_project(root, width=64, height=36, frames=8, fps=30.0):
    """Single full-frame object and an effects-free blueprint: the
    rendered output must equal the input pixel for pixel."""
    from reframe.annotation_io import save_annotations, save_blueprint
    from reframe.frame_io import write_frame_dir
    from reframe.model import (
        AnnotationFile,
        AspectRatio,
        Blueprint,
        EffectIn,
        EffectTrans,
        ScenePlan,
    )

    rng = np.random.default_rng(99)
    pixels = rng.integers(0, 256, (frames, height, width, 3), np.uint8)
    af = AnnotationFile(
        video_id="identity",
        width=width,
        height=height,
        fps=fps,
        scenes=(Scene(0, 0, frames),),
        annotations=(
            SceneAnnotation(
                scene_index=0,
                keyframe=frames // 2,
                objects=(rect_object(1, "the whole frame", width, height,
                                     0, 0, width, height),),
            ),
        ),
    )
    bp = Blueprint(
        video_id="identity",
        plans=(ScenePlan(0, 1, (1,), EffectIn.NONE, EffectTrans.NONE,
                         AspectRatio(width, height)),),
    )
    frames_dir = root / "frames"
    write_frame_dir(pixels, frames_dir)
    (root / "annotations.json").write_bytes(save_annotations(af))
    (root / "blueprint.json").write_bytes(save_blueprint(bp))
    return {
        "frames_dir": frames_dir,
        "annotations": root / "annotations.json",
        "blueprint": root / "blueprint.json",
        "pixels": pixels,
    }


@pytest.fixture
def two_scene_annotations():
    """2 scenes, 3 objects on a 64x36 canvas, keyframes at midpoints.

    Scene 0 (frames 0-39): a large central object and a small corner one.
    Scene 1 (frames 40-79): a single object.
    """
    width, height = 64, 36
    scenes = (Scene(0, 0, 40), Scene(1, 40, 80))
    annotations = (
        SceneAnnotation(
            scene_index=0,
            keyframe=20,
            objects=(
                rect_object(1, "a brown dog running", width, height, 22, 8, 42, 28),
                rect_object(2, "a red car parked", width, height, 2, 2, 10, 8),
            ),
        ),
        SceneAnnotation(
            scene_index=1,
            keyframe=60,
            objects=(
                rect_object(1, "a boy standing in the field", width, height, 24, 6, 44, 30),
            ),
        ),
    )
    return AnnotationFile(
        video_id="fixture",
        width=width,
        height=height,
        fps=30.0,
        scenes=scenes,
        annotations=annotations,
    )
