"""Command-line orchestration of the reframing pipeline.

Each stage is a subcommand with file handoffs so it can be run, tested
and replayed in isolation; `reframe reframe` composes them end to end.
Every command writes a run manifest next to its output recording input
paths, the effective configuration, the tool version and per-stage
wall-clock timings.  All JSON outputs are canonical, so reruns on
identical inputs are byte-identical (manifest timings aside).

Exit codes: 0 success, 2 I/O or input-file error, 3 invalid
configuration, 4 planning failure, 5 blueprint/annotation mismatch,
64 usage errors (unknown flags, missing arguments).
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click

from . import __version__
from .annotation_io import (
    AnnotationFormatError,
    ScenesFile,
    canonical_dumps,
    describe_scene,
    load_annotations,
    save_blueprint,
    load_blueprint,
    save_scenes,
)
from .frame_io import FrameIOError, read_frame_dir, write_frame_dir
from .metrics import MetricError, evaluate_sequence, export_prediction_masks
from .model import (
    AspectRatio,
    DimensionMismatchError,
    ReframeError,
    SceneDetectConfig,
    ValidationError,
    validate_blueprint,
)
from .planner import (
    Instruction,
    PlannerConfig,
    PlanningError,
    FixtureError,
    TransportError,
    build_prompt,
    complete,
    heuristic_plan,
    parse_plan_text,
)
from .renderer import (
    RenderConfig,
    RenderError,
    center_cut,
    portrait_dims,
    render_video,
)
from .scene_detect import detect_scenes

EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_PLANNING = 4
EXIT_MISMATCH = 5
EXIT_USAGE = 64


class StageError(Exception):
    """Command failure with a pinned exit code."""

    def __init__(self, exit_code: int, message: str):
        self.exit_code = exit_code
        super().__init__(message)


def _manifest_path(target: Path) -> Path:
    if target.is_dir():
        return target / "manifest.json"
    return target.with_name(target.stem + ".manifest.json")


def _write_manifest(
    target: Path, command: str, inputs: dict, config: dict, timings: dict[str, float]
) -> None:
    manifest = {
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "config": config,
        "version": __version__,
        "timing_s": {k: float(v) for k, v in timings.items()},
    }
    _manifest_path(target).write_bytes(canonical_dumps(manifest))


class _Stopwatch:
    """Collects per-stage wall-clock durations."""

    def __init__(self) -> None:
        self.timings: dict[str, float] = {}

    def run(self, name: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[name] = time.perf_counter() - start


def _read_frames(frames_path: str, fps: float):
    """PNG directory, or a container file when RAVA_FFMPEG is set."""
    try:
        if Path(frames_path).is_file():
            from .frame_io import decode_video_file

            return decode_video_file(frames_path, fps=fps)
        return read_frame_dir(frames_path, fps=fps)
    except FrameIOError as exc:
        raise StageError(EXIT_IO, str(exc))


def _load_annotation_file(path: str):
    try:
        return load_annotations(Path(path).read_bytes())
    except OSError as exc:
        raise StageError(EXIT_IO, f"cannot read {path}: {exc}")
    except AnnotationFormatError as exc:
        raise StageError(EXIT_IO, f"{path}: {exc}")


@click.group(name="reframe")
@click.version_option(version=__version__)
def cli() -> None:
    """Reframe landscape videos to a new aspect ratio."""


@cli.command("detect-scenes")
@click.argument("frames_dir", type=click.Path())
@click.option("--alpha1", type=float, default=5.0, show_default=True,
              help="Content-score cut threshold (0-255).")
@click.option("--alpha2", type=int, default=5, show_default=True,
              help="Minimum scene length in frames.")
@click.option("--fps", type=float, default=30.0, show_default=True)
@click.option("--video-id", default="", help="Identifier stored in the output.")
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Where to write the scene list JSON.")
def cmd_detect_scenes(frames_dir, alpha1, alpha2, fps, video_id, out_path):
    """Split a PNG frame directory into scenes."""
    watch = _Stopwatch()
    try:
        cfg = SceneDetectConfig(alpha1=alpha1, alpha2=alpha2)
    except ValidationError as exc:
        raise StageError(EXIT_CONFIG, str(exc))
    video = watch.run("read_frames", _read_frames, frames_dir, fps)
    scenes = watch.run("detect_scenes", detect_scenes, video, cfg)
    sf = ScenesFile(
        video_id=video_id or Path(frames_dir).name,
        width=video.width,
        height=video.height,
        fps=fps,
        scenes=tuple(scenes),
    )
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_scenes(sf))
    _write_manifest(
        out,
        "detect-scenes",
        {"frames_dir": frames_dir},
        {"alpha1": alpha1, "alpha2": alpha2, "fps": fps},
        watch.timings,
    )
    click.echo(f"{len(scenes)} scene(s) -> {out}")


def _planner_config(mode, endpoint, model_name, timeout, max_retries, multimodal, replay):
    try:
        return PlannerConfig(
            mode=mode,
            endpoint=endpoint,
            model_name=model_name,
            timeout=timeout,
            max_retries=max_retries,
            multimodal=multimodal,
            replay_dir=Path(replay) if replay else None,
        )
    except ValidationError as exc:
        raise StageError(EXIT_CONFIG, str(exc))


@cli.command("plan")
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--instruction", default="", help="User request; empty = no preference.")
@click.option("--aspect", default="9:16", show_default=True, help="Target W:H.")
@click.option("--mode", type=click.Choice(["heuristic", "llm"]), default="heuristic",
              show_default=True)
@click.option("--endpoint", default="", help="Chat-completion base URL (or env RAVA_LLM_ENDPOINT).")
@click.option("--model", "model_name", default="", help="Model name for llm mode.")
@click.option("--timeout", type=float, default=30.0, show_default=True)
@click.option("--max-retries", type=int, default=3, show_default=True)
@click.option("--multimodal", is_flag=True, help="Attach scene keyframe images.")
@click.option("--replay", type=click.Path(), default=None,
              help="Directory of recorded completions keyed by prompt hash.")
@click.option("--frames", "frames_dir", type=click.Path(), default=None,
              help="Frame directory (required with --multimodal).")
@click.option("--out", "out_path", type=click.Path(), required=True)
def cmd_plan(annotations_path, instruction, aspect, mode, endpoint, model_name,
             timeout, max_retries, multimodal, replay, frames_dir, out_path):
    """Produce a validated execution blueprint."""
    watch = _Stopwatch()
    af = _load_annotation_file(annotations_path)
    try:
        target = AspectRatio.parse(aspect)
        instr = Instruction(text=instruction)
    except ValidationError as exc:
        raise StageError(EXIT_CONFIG, str(exc))

    try:
        if mode == "heuristic":
            bp = watch.run(
                "plan", heuristic_plan, instr, af.annotations, target, af.video_id
            )
        else:
            cfg = _planner_config(
                mode, endpoint, model_name, timeout, max_retries, multimodal, replay
            )
            descriptions = [describe_scene(a) for a in af.annotations]
            prompt = build_prompt(instr, descriptions, target)
            images: list[bytes] = []
            if cfg.multimodal:
                if not frames_dir:
                    raise StageError(EXIT_CONFIG, "--multimodal requires --frames")
                video = _read_frames(frames_dir, af.fps)
                images = [_png_bytes(video.frames[a.keyframe]) for a in af.annotations]
            text = watch.run("complete", complete, cfg, prompt, images)
            bp = watch.run("parse", parse_plan_text, text, af.scenes, af.video_id)
    except (PlanningError, TransportError, FixtureError, ValidationError) as exc:
        raise StageError(EXIT_PLANNING, f"planning failed: {exc}")

    violations = validate_blueprint(bp, af.annotations, af.scenes)
    if violations:
        detail = "; ".join(f"scene {v.scene_index} {v.field}: {v.message}" for v in violations)
        raise StageError(EXIT_PLANNING, f"planned blueprint is invalid: {detail}")

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_blueprint(bp))
    _write_manifest(
        out,
        "plan",
        {"annotations": annotations_path},
        {
            "mode": mode,
            "aspect": str(target),
            "instruction": instruction,
            "multimodal": multimodal,
        },
        watch.timings,
    )
    click.echo(f"{len(bp.plans)} plan(s) -> {out}")


def _png_bytes(frame) -> bytes:
    import io

    import numpy as np
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(frame), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _render_config(af, bp, out_width, out_height, zoom_depth, fade_frames, margin):
    if not out_width or not out_height:
        aspect = bp.plans[0].aspect
        try:
            out_width, out_height = portrait_dims(af.width, af.height, aspect)
        except RenderError as exc:
            raise StageError(EXIT_CONFIG, str(exc))
    try:
        return RenderConfig(
            out_width=out_width,
            out_height=out_height,
            zoom_depth=zoom_depth,
            fade_frames=fade_frames,
            margin=margin,
        )
    except ValidationError as exc:
        raise StageError(EXIT_CONFIG, str(exc))


def _render_to_dir(video, af, bp, cfg, out_dir, jobs, watch):
    violations = validate_blueprint(bp, af.annotations, af.scenes)
    if violations:
        detail = "; ".join(f"scene {v.scene_index} {v.field}: {v.message}" for v in violations)
        raise StageError(EXIT_MISMATCH, f"blueprint does not match annotations: {detail}")
    if af.frame_count != len(video):
        raise StageError(
            EXIT_MISMATCH,
            f"annotation covers {af.frame_count} frames, video has {len(video)}",
        )
    try:
        result = watch.run(
            "render", render_video, video, bp, af.annotations, af.scenes, cfg, jobs
        )
    except (RenderError, DimensionMismatchError) as exc:
        raise StageError(EXIT_MISMATCH, str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    watch.run("write_frames", write_frame_dir, result, out)
    return result


@cli.command("render")
@click.option("--frames", "frames_dir", type=click.Path(), required=True)
@click.option("--blueprint", "blueprint_path", type=click.Path(), required=True)
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--out-width", type=int, default=0, help="Default: derived from the plan aspect.")
@click.option("--out-height", type=int, default=0)
@click.option("--zoom-depth", type=float, default=0.8, show_default=True)
@click.option("--fade-frames", type=int, default=None)
@click.option("--margin", type=float, default=0.10, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
def cmd_render(frames_dir, blueprint_path, annotations_path, out_dir,
               out_width, out_height, zoom_depth, fade_frames, margin, jobs):
    """Execute a blueprint into a PNG sequence."""
    watch = _Stopwatch()
    af = _load_annotation_file(annotations_path)
    try:
        bp = load_blueprint(Path(blueprint_path).read_bytes())
    except OSError as exc:
        raise StageError(EXIT_IO, f"cannot read {blueprint_path}: {exc}")
    except AnnotationFormatError as exc:
        raise StageError(EXIT_IO, f"{blueprint_path}: {exc}")
    video = watch.run("read_frames", _read_frames, frames_dir, af.fps)
    cfg = _render_config(af, bp, out_width, out_height, zoom_depth, fade_frames, margin)
    _render_to_dir(video, af, bp, cfg, out_dir, jobs, watch)
    _write_manifest(
        Path(out_dir),
        "render",
        {
            "frames_dir": frames_dir,
            "blueprint": blueprint_path,
            "annotations": annotations_path,
        },
        {
            "out_width": cfg.out_width,
            "out_height": cfg.out_height,
            "zoom_depth": cfg.zoom_depth,
            "fade_frames": cfg.fade_frames,
            "margin": cfg.margin,
            "jobs": jobs,
        },
        watch.timings,
    )
    click.echo(f"{len(video)} frame(s) -> {out_dir}")


@cli.command("reframe")
@click.argument("frames_dir", type=click.Path())
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--instruction", default="")
@click.option("--aspect", default="9:16", show_default=True)
@click.option("--mode", type=click.Choice(["heuristic", "llm"]), default="heuristic",
              show_default=True)
@click.option("--endpoint", default="")
@click.option("--model", "model_name", default="")
@click.option("--timeout", type=float, default=30.0)
@click.option("--max-retries", type=int, default=3)
@click.option("--multimodal", is_flag=True)
@click.option("--replay", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--out-width", type=int, default=0)
@click.option("--out-height", type=int, default=0)
@click.option("--zoom-depth", type=float, default=0.8)
@click.option("--fade-frames", type=int, default=None)
@click.option("--margin", type=float, default=0.10)
@click.option("--jobs", type=int, default=1)
def cmd_reframe(frames_dir, annotations_path, instruction, aspect, mode, endpoint,
                model_name, timeout, max_retries, multimodal, replay, out_dir,
                out_width, out_height, zoom_depth, fade_frames, margin, jobs):
    """Plan and render in one step."""
    watch = _Stopwatch()
    af = _load_annotation_file(annotations_path)
    try:
        target = AspectRatio.parse(aspect)
        instr = Instruction(text=instruction)
    except ValidationError as exc:
        raise StageError(EXIT_CONFIG, str(exc))
    video = watch.run("read_frames", _read_frames, frames_dir, af.fps)

    try:
        if mode == "heuristic":
            bp = watch.run(
                "plan", heuristic_plan, instr, af.annotations, target, af.video_id
            )
        else:
            cfg_p = _planner_config(
                mode, endpoint, model_name, timeout, max_retries, multimodal, replay
            )
            descriptions = [describe_scene(a) for a in af.annotations]
            prompt = build_prompt(instr, descriptions, target)
            images = (
                [_png_bytes(video.frames[a.keyframe]) for a in af.annotations]
                if cfg_p.multimodal
                else []
            )
            text = watch.run("complete", complete, cfg_p, prompt, images)
            bp = watch.run("parse", parse_plan_text, text, af.scenes, af.video_id)
    except (PlanningError, TransportError, FixtureError, ValidationError) as exc:
        raise StageError(EXIT_PLANNING, f"planning failed: {exc}")

    cfg = _render_config(af, bp, out_width, out_height, zoom_depth, fade_frames, margin)
    _render_to_dir(video, af, bp, cfg, out_dir, jobs, watch)
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    (out / "blueprint.json").write_bytes(save_blueprint(bp))
    _write_manifest(
        out,
        "reframe",
        {"frames_dir": frames_dir, "annotations": annotations_path},
        {
            "mode": mode,
            "aspect": str(target),
            "instruction": instruction,
            "out_width": cfg.out_width,
            "out_height": cfg.out_height,
            "zoom_depth": cfg.zoom_depth,
            "fade_frames": cfg.fade_frames,
            "margin": cfg.margin,
            "jobs": jobs,
        },
        watch.timings,
    )
    click.echo(f"{len(video)} frame(s) -> {out_dir}")


@cli.command("center-cut")
@click.argument("frames_dir", type=click.Path())
@click.option("--aspect", default="9:16", show_default=True)
@click.option("--fps", type=float, default=30.0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def cmd_center_cut(frames_dir, aspect, fps, out_dir):
    """Content-blind baseline: fixed centered crop at source height."""
    watch = _Stopwatch()
    try:
        target = AspectRatio.parse(aspect)
    except ValidationError as exc:
        raise StageError(EXIT_CONFIG, str(exc))
    video = watch.run("read_frames", _read_frames, frames_dir, fps)
    try:
        result = watch.run("center_cut", center_cut, video, target)
    except RenderError as exc:
        raise StageError(EXIT_CONFIG, str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    watch.run("write_frames", write_frame_dir, result, out)
    _write_manifest(
        out,
        "center-cut",
        {"frames_dir": frames_dir},
        {"aspect": str(target), "fps": fps},
        watch.timings,
    )
    click.echo(f"{len(result)} frame(s) at {result.width}x{result.height} -> {out_dir}")


@cli.command("export-predictions")
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--instruction", default="", help="Bias selection toward matching captions.")
@click.option("--pattern", default="%05d.png", show_default=True,
              help="Filename pattern, printf-style over the frame index.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def cmd_export_predictions(annotations_path, instruction, pattern, out_dir):
    """Emit per-frame salient-object masks (keyframe mask replicated)."""
    watch = _Stopwatch()
    af = _load_annotation_file(annotations_path)
    try:
        paths = watch.run(
            "export", export_prediction_masks, af, instruction, out_dir, pattern
        )
    except PlanningError as exc:
        raise StageError(EXIT_PLANNING, str(exc))
    except OSError as exc:
        raise StageError(EXIT_IO, str(exc))
    _write_manifest(
        Path(out_dir),
        "export-predictions",
        {"annotations": annotations_path},
        {"instruction": instruction, "pattern": pattern},
        watch.timings,
    )
    click.echo(f"{len(paths)} mask(s) -> {out_dir}")


@cli.command("evaluate")
@click.argument("pred_dir", type=click.Path())
@click.argument("gt_dir", type=click.Path())
@click.option("--report", "report_path", type=click.Path(), required=True)
def cmd_evaluate(pred_dir, gt_dir, report_path):
    """Score a prediction directory against ground truth."""
    watch = _Stopwatch()
    try:
        report = watch.run("evaluate", evaluate_sequence, pred_dir, gt_dir)
    except (MetricError, DimensionMismatchError, OSError) as exc:
        raise StageError(EXIT_IO, str(exc))
    out = Path(report_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(
        canonical_dumps(
            {
                "mae": report.mae,
                "max_f": report.max_f,
                "max_e": report.max_e,
                "s_m": report.s_m,
                "frame_count": report.frame_count,
            }
        )
    )
    _write_manifest(
        out,
        "evaluate",
        {"pred_dir": pred_dir, "gt_dir": gt_dir},
        {},
        watch.timings,
    )
    click.echo(
        f"MAE={report.mae:.4f} max-F={report.max_f:.4f} "
        f"max-E={report.max_e:.4f} S={report.s_m:.4f} "
        f"({report.frame_count} frames) -> {out}"
    )


def main(argv: list[str] | None = None) -> int:
    """Entry point with pinned exit codes; returns instead of exiting."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help and friends
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return exc.exit_code
    except StageError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except ReframeError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
