"""Domain type invariants and blueprint validation."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rect_object
from reframe.model import (
    AnnotationFile,
    AspectRatio,
    BBox,
    Blueprint,
    DimensionMismatchError,
    EffectIn,
    EffectTrans,
    FrameSequence,
    Mask,
    ObjectRecord,
    Scene,
    SceneAnnotation,
    SceneDetectConfig,
    ScenePlan,
    ValidationError,
    Violation,
    check_scene_partition,
    validate_blueprint,
)


def make_plan(scene_index, layout, ids, aspect=AspectRatio(9, 16)):
    return ScenePlan(
        scene_index=scene_index,
        layout=layout,
        object_ids=tuple(ids),
        effect_in=EffectIn.NONE,
        effect_trans=EffectTrans.NONE,
        aspect=aspect,
    )


class TestFrameSequence:
    def test_holds_frames(self):
        video = FrameSequence.from_frames(np.zeros((3, 4, 6, 3), np.uint8))
        assert (video.width, video.height, video.fps) == (6, 4, 30.0)
        assert len(video) == 3

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            FrameSequence(width=4, height=4, fps=30.0,
                          frames=np.zeros((0, 4, 4, 3), np.uint8))

    def test_rejects_wrong_dims(self):
        with pytest.raises(DimensionMismatchError):
            FrameSequence(width=5, height=4, fps=30.0,
                          frames=np.zeros((1, 4, 4, 3), np.uint8))

    def test_rejects_non_uint8(self):
        with pytest.raises(ValidationError):
            FrameSequence(width=4, height=4, fps=30.0,
                          frames=np.zeros((1, 4, 4, 3), np.float32))

    def test_frames_become_read_only(self):
        video = FrameSequence.from_frames(np.zeros((1, 4, 4, 3), np.uint8))
        with pytest.raises(ValueError):
            video.frames[0, 0, 0, 0] = 1


class TestScene:
    def test_requires_start_before_end(self):
        with pytest.raises(ValidationError):
            Scene(index=0, start=5, end=5)

    def test_partition_tiles(self):
        check_scene_partition([Scene(0, 0, 10), Scene(1, 10, 30)], 30)

    def test_partition_rejects_gap(self):
        with pytest.raises(ValidationError):
            check_scene_partition([Scene(0, 0, 10), Scene(1, 12, 30)], 30)

    def test_partition_rejects_wrong_total(self):
        with pytest.raises(ValidationError):
            check_scene_partition([Scene(0, 0, 10)], 12)


class TestBBox:
    def test_orders_coordinates(self):
        with pytest.raises(ValidationError):
            BBox(10, 0, 10, 5)
        with pytest.raises(ValidationError):
            BBox(-1, 0, 10, 5)

    def test_derived_geometry(self):
        box = BBox(2, 4, 10, 10)
        assert box.center == (6, 7)
        assert box.area == 48


class TestMask:
    def test_run_sum_must_match(self):
        with pytest.raises(ValidationError):
            Mask(width=2, height=2, runs=(3,))

    def test_negative_runs_rejected(self):
        with pytest.raises(ValidationError):
            Mask(width=2, height=2, runs=(-1, 5))

    def test_tight_bbox(self):
        grid = np.zeros((6, 8), np.uint8)
        grid[2:5, 3:7] = 1
        assert Mask.from_array(grid).tight_bbox() == BBox(3, 2, 7, 5)

    @given(
        st.integers(1, 9).flatmap(
            lambda w: st.integers(1, 9).flatmap(
                lambda h: st.lists(
                    st.integers(0, 1), min_size=w * h, max_size=w * h
                ).map(lambda bits: np.array(bits, np.uint8).reshape(h, w))
            )
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_rle_roundtrip(self, grid):
        assert np.array_equal(Mask.from_array(grid).to_array(), grid)


class TestObjectRecord:
    def test_tight_bbox_enforced(self):
        grid = np.zeros((6, 8), np.uint8)
        grid[2:5, 3:7] = 1
        with pytest.raises(ValidationError):
            ObjectRecord(id=1, caption="x", bbox=BBox(0, 0, 8, 6),
                         mask=Mask.from_array(grid))

    def test_within_tolerance_accepted(self):
        grid = np.zeros((6, 8), np.uint8)
        grid[2:5, 3:7] = 1
        ObjectRecord(id=1, caption="x", bbox=BBox(2.5, 1.5, 7.5, 5.5),
                     mask=Mask.from_array(grid))


class TestAspectRatio:
    def test_normalizes(self):
        assert AspectRatio(18, 32) == AspectRatio(9, 16)
        assert str(AspectRatio(1920, 1080)) == "16:9"

    def test_parse(self):
        assert AspectRatio.parse(" 9:16 ") == AspectRatio(9, 16)
        with pytest.raises(ValidationError):
            AspectRatio.parse("9x16")
        with pytest.raises(ValidationError):
            AspectRatio.parse("0:16")


class TestSceneAnnotation:
    def test_duplicate_ids_rejected(self):
        obj = rect_object(1, "a", 8, 6, 1, 1, 4, 4)
        with pytest.raises(ValidationError):
            SceneAnnotation(scene_index=0, keyframe=0, objects=(obj, obj))


class TestAnnotationFileInvariants:
    def test_keyframe_outside_scene_rejected(self, two_scene_annotations):
        af = two_scene_annotations
        bad = SceneAnnotation(
            scene_index=0, keyframe=50, objects=af.annotations[0].objects
        )
        with pytest.raises(ValidationError):
            AnnotationFile(
                video_id=af.video_id, width=af.width, height=af.height,
                fps=af.fps, scenes=af.scenes,
                annotations=(bad, af.annotations[1]),
            )

    def test_mask_dims_must_match_header(self, two_scene_annotations):
        af = two_scene_annotations
        with pytest.raises(DimensionMismatchError):
            AnnotationFile(
                video_id=af.video_id, width=af.width + 2, height=af.height,
                fps=af.fps,
                scenes=af.scenes, annotations=af.annotations,
            )


class TestValidateBlueprint:
    def fixture(self, two_scene_annotations):
        af = two_scene_annotations
        return af.annotations, af.scenes

    def test_well_formed_has_no_violations(self, two_scene_annotations):
        annotations, scenes = self.fixture(two_scene_annotations)
        bp = Blueprint(
            video_id="v",
            plans=(make_plan(0, 2, (1, 2)), make_plan(1, 1, (1,))),
        )
        assert validate_blueprint(bp, annotations, scenes) == []

    def test_layout_count_mismatch(self, two_scene_annotations):
        annotations, scenes = self.fixture(two_scene_annotations)
        bp = Blueprint(
            video_id="v",
            plans=(make_plan(0, 2, (1,)), make_plan(1, 1, (1,))),
        )
        violations = validate_blueprint(bp, annotations, scenes)
        assert len(violations) == 1
        assert violations[0].field == "layout"
        assert violations[0].scene_index == 0

    def test_dangling_object_reference(self, two_scene_annotations):
        annotations, scenes = self.fixture(two_scene_annotations)
        bp = Blueprint(
            video_id="v",
            plans=(make_plan(0, 1, (99,)), make_plan(1, 1, (1,))),
        )
        violations = validate_blueprint(bp, annotations, scenes)
        assert [v.field for v in violations] == ["object_ids"]
        assert "99" in violations[0].message

    def test_missing_and_extra_plans(self, two_scene_annotations):
        annotations, scenes = self.fixture(two_scene_annotations)
        bp = Blueprint(video_id="v", plans=(make_plan(7, 1, (1,)),))
        fields = {(v.scene_index, v.field) for v in validate_blueprint(bp, annotations, scenes)}
        assert (0, "plans") in fields
        assert (1, "plans") in fields
        assert (7, "scene_index") in fields

    def test_layout_above_cap(self, two_scene_annotations):
        annotations, scenes = self.fixture(two_scene_annotations)
        bp = Blueprint(
            video_id="v",
            plans=(make_plan(0, 4, (1, 2, 1, 2)), make_plan(1, 1, (1,))),
        )
        assert any(
            v.field == "layout" and "exceeds" in v.message
            for v in validate_blueprint(bp, annotations, scenes)
        )

    def test_order_independent(self, two_scene_annotations):
        annotations, scenes = self.fixture(two_scene_annotations)
        plans = (make_plan(0, 2, (1, 99)), make_plan(1, 2, (1, 1)))
        results = []
        for perm in itertools.permutations(plans):
            bp = Blueprint(video_id="v", plans=perm)
            results.append(set(validate_blueprint(bp, annotations, scenes)))
        assert all(r == results[0] for r in results)
        assert all(isinstance(v, Violation) for v in results[0])


class TestBlueprint:
    def test_plans_sorted_by_scene_index(self):
        bp = Blueprint(
            video_id="v",
            plans=(make_plan(2, 1, (1,)), make_plan(0, 1, (1,)), make_plan(1, 1, (1,))),
        )
        assert [p.scene_index for p in bp.plans] == [0, 1, 2]
        assert bp.plan_for(1).scene_index == 1
        with pytest.raises(KeyError):
            bp.plan_for(9)


class TestSceneDetectConfig:
    def test_alpha_bounds(self):
        with pytest.raises(ValidationError):
            SceneDetectConfig(alpha1=0.0, alpha2=5)
        with pytest.raises(ValidationError):
            SceneDetectConfig(alpha1=5.0, alpha2=0)
