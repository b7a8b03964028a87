"""Command-line behavior: exit codes, file handoffs, manifests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from conftest import build_identity_project, build_two_scene_project, solid_video
from reframe.annotation_io import describe_scene, load_annotations, load_blueprint, load_scenes
from reframe.cli import main
from reframe.frame_io import read_frame_dir, write_frame_dir
from reframe.model import AspectRatio
from reframe.planner import Instruction, build_prompt, prompt_digest, render_plan_line


def run(*args):
    return main([str(a) for a in args])


def frames_on_disk(tmp_path, colors, lengths, name="frames", width=32, height=18):
    pixels, _ = solid_video(colors, lengths, width=width, height=height)
    out = tmp_path / name
    write_frame_dir(pixels, out)
    return out


class TestUsage:
    @pytest.mark.parametrize(
        "cmd",
        ["detect-scenes", "plan", "render", "reframe", "center-cut", "evaluate"],
    )
    def test_help_exits_zero(self, cmd, capsys):
        assert run(cmd, "--help") == 0
        assert "Usage" in capsys.readouterr().out

    def test_unknown_flag_exits_64(self, capsys):
        assert run("detect-scenes", "--frobnicate") == 64
        assert "--frobnicate" in capsys.readouterr().err

    def test_unknown_command_exits_64(self):
        assert run("transmogrify") == 64


class TestDetectScenes:
    def test_constant_video_single_scene(self, tmp_path, capsys):
        frames = frames_on_disk(tmp_path, [(200, 30, 30)], [20])
        out = tmp_path / "scenes.json"
        assert run("detect-scenes", frames, "--alpha1", 5, "--alpha2", 5,
                   "--out", out) == 0
        assert "1 scene(s)" in capsys.readouterr().out
        sf = load_scenes(out.read_bytes())
        assert [(s.start, s.end) for s in sf.scenes] == [(0, 20)]
        assert (tmp_path / "scenes.manifest.json").is_file()

    def test_min_length_suppression(self, tmp_path):
        frames = frames_on_disk(
            tmp_path, [(200, 30, 30), (30, 200, 30), (30, 30, 200)], [10, 30, 40]
        )
        out = tmp_path / "scenes.json"
        assert run("detect-scenes", frames, "--alpha1", 5, "--alpha2", 30,
                   "--out", out) == 0
        sf = load_scenes(out.read_bytes())
        assert [(s.start, s.end) for s in sf.scenes] == [(0, 40), (40, 80)]

    def test_missing_directory_exits_2(self, tmp_path, capsys):
        assert run("detect-scenes", tmp_path / "nope", "--out", tmp_path / "s.json") == 2
        assert "nope" in capsys.readouterr().err

    def test_invalid_config_exits_3(self, tmp_path):
        frames = frames_on_disk(tmp_path, [(1, 2, 3)], [3])
        assert run("detect-scenes", frames, "--alpha1", 0, "--out",
                   tmp_path / "s.json") == 3


class TestPlan:
    def test_heuristic_plan_two_scenes(self, tmp_path, capsys):
        project = build_two_scene_project(tmp_path)
        out = tmp_path / "blueprint.json"
        assert run("plan", "--annotations", project["annotations"],
                   "--instruction", "follow the dancer", "--aspect", "9:16",
                   "--out", out) == 0
        bp = load_blueprint(out.read_bytes())
        assert len(bp.plans) == 2
        assert bp.plans[0].object_ids == (1,)
        assert str(bp.plans[0].aspect) == "9:16"

    def test_llm_replay_matches_golden(self, tmp_path):
        project = build_two_scene_project(tmp_path)
        af = project["file"]
        prompt = build_prompt(
            Instruction("follow the dancer"),
            [describe_scene(a) for a in af.annotations],
            AspectRatio(9, 16),
        )
        replay = tmp_path / "replay"
        replay.mkdir()
        plan_text = (
            "Scene-0: layout=1; objects=[1]; effect_in=zoom_in; "
            "effect_trans=fade_out; aspect=9:16\n"
            "Scene-1: layout=1; objects=[1]; effect_in=none; "
            "effect_trans=none; aspect=9:16\n"
        )
        (replay / f"{prompt_digest(prompt)}.txt").write_text(plan_text)
        out = tmp_path / "blueprint.json"
        assert run("plan", "--annotations", project["annotations"],
                   "--instruction", "follow the dancer", "--aspect", "9:16",
                   "--mode", "llm", "--replay", replay, "--out", out) == 0
        bp = load_blueprint(out.read_bytes())
        assert [render_plan_line(p) for p in bp.plans] == plan_text.splitlines()

    def test_llm_malformed_fixture_exits_4(self, tmp_path, capsys):
        project = build_two_scene_project(tmp_path)
        af = project["file"]
        prompt = build_prompt(
            Instruction(""),
            [describe_scene(a) for a in af.annotations],
            AspectRatio(9, 16),
        )
        replay = tmp_path / "replay"
        replay.mkdir()
        (replay / f"{prompt_digest(prompt)}.txt").write_text(
            "Scene-0: layout=2; objects=[1]; effect_in=none; effect_trans=none; aspect=9:16\n"
        )
        assert run("plan", "--annotations", project["annotations"],
                   "--mode", "llm", "--replay", replay,
                   "--out", tmp_path / "bp.json") == 4
        err = capsys.readouterr().err
        assert "layout/object mismatch" in err

    def test_llm_without_endpoint_exits_4(self, tmp_path, monkeypatch):
        monkeypatch.delenv("RAVA_LLM_ENDPOINT", raising=False)
        project = build_two_scene_project(tmp_path)
        assert run("plan", "--annotations", project["annotations"],
                   "--mode", "llm", "--out", tmp_path / "bp.json") == 4

    def test_malformed_annotations_exit_2(self, tmp_path):
        bad = tmp_path / "ann.json"
        bad.write_text('{"video_id": "x"}')
        assert run("plan", "--annotations", bad, "--out", tmp_path / "bp.json") == 2


class TestRender:
    def test_identity_render(self, tmp_path):
        project = build_identity_project(tmp_path)
        out = tmp_path / "out"
        assert run("render", "--frames", project["frames_dir"],
                   "--blueprint", project["blueprint"],
                   "--annotations", project["annotations"],
                   "--out", out) == 0
        rendered = read_frame_dir(out)
        assert np.array_equal(rendered.frames, project["pixels"])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "render"
        assert manifest["version"]

    def test_derived_output_dims_from_aspect(self, tmp_path):
        project = build_two_scene_project(tmp_path)
        out = tmp_path / "out"
        first = tmp_path / "bp.json"
        assert run("plan", "--annotations", project["annotations"],
                   "--aspect", "9:16", "--out", first) == 0
        assert run("render", "--frames", project["frames_dir"],
                   "--blueprint", first,
                   "--annotations", project["annotations"],
                   "--out", out) == 0
        rendered = read_frame_dir(out)
        # 64x36 source at 9:16 keeps height: width = round(36 * 9/16) = 20
        assert (rendered.width, rendered.height) == (20, 36)
        assert len(rendered) == 80

    def test_dangling_object_id_exits_5(self, tmp_path, capsys):
        project = build_identity_project(tmp_path)
        doc = json.loads(project["blueprint"].read_text())
        doc["plans"][0]["object_ids"] = [9]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run("render", "--frames", project["frames_dir"],
                   "--blueprint", bad,
                   "--annotations", project["annotations"],
                   "--out", tmp_path / "out") == 5
        assert "9" in capsys.readouterr().err


class TestReframe:
    def test_end_to_end_heuristic(self, tmp_path):
        project = build_two_scene_project(tmp_path)
        out = tmp_path / "out"
        assert run("reframe", project["frames_dir"],
                   "--annotations", project["annotations"],
                   "--instruction", "follow the dancer",
                   "--aspect", "9:16", "--out", out) == 0
        rendered = read_frame_dir(out)
        assert len(rendered) == 80
        bp = load_blueprint((out / "blueprint.json").read_bytes())
        assert bp.plans[0].object_ids == (1,)
        assert (out / "manifest.json").is_file()


class TestCenterCut:
    def test_square_identity_bytes(self, tmp_path):
        frames = frames_on_disk(tmp_path, [(10, 200, 30)], [3], width=24, height=24)
        out = tmp_path / "out"
        assert run("center-cut", frames, "--aspect", "1:1", "--out", out) == 0
        for name in ("frame_000000.png", "frame_000002.png"):
            assert (out / name).read_bytes() == (frames / name).read_bytes()

    def test_wider_target_exits_3(self, tmp_path):
        frames = frames_on_disk(tmp_path, [(10, 200, 30)], [2], width=24, height=24)
        assert run("center-cut", frames, "--aspect", "2:1",
                   "--out", tmp_path / "out") == 3


class TestExportPredictions:
    def test_masks_match_annotations(self, tmp_path):
        project = build_two_scene_project(tmp_path)
        out = tmp_path / "pred"
        assert run("export-predictions", "--annotations", project["annotations"],
                   "--instruction", "follow the dancer", "--out", out) == 0
        assert len(list(out.glob("*.png"))) == 80
        report = tmp_path / "report.json"
        assert run("evaluate", out, out, "--report", report) == 0
        assert json.loads(report.read_text())["mae"] == 0.0


class TestEvaluate:
    def test_perfect_prediction_report(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        gt = tmp_path / "gt"
        gt.mkdir()
        for i in range(3):
            mask = (rng.random((12, 16)) > 0.5).astype(np.uint8) * 255
            mask[0, 0] = 255
            Image.fromarray(mask, mode="L").save(gt / f"{i:05d}.png")
        report = tmp_path / "report.json"
        assert run("evaluate", gt, gt, "--report", report) == 0
        doc = json.loads(report.read_text())
        assert doc["mae"] == 0.0
        assert doc["max_f"] == 1.0
        assert doc["max_e"] == pytest.approx(1.0, abs=1e-4)
        assert doc["s_m"] == pytest.approx(1.0, abs=1e-4)
        assert doc["frame_count"] == 3
        assert set(doc) == {"mae", "max_f", "max_e", "s_m", "frame_count"}

    def test_missing_predictions_exit_2(self, tmp_path):
        gt = tmp_path / "gt"
        gt.mkdir()
        Image.fromarray(np.full((4, 4), 255, np.uint8), mode="L").save(gt / "a.png")
        pred = tmp_path / "pred"
        pred.mkdir()
        assert run("evaluate", pred, gt, "--report", tmp_path / "r.json") == 2
