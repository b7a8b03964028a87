"""Frame sequence adapters: numbered PNG directories and ffmpeg shell-out.

The core never links a codec.  Container formats are handled, when the
``RAVA_FFMPEG`` environment variable points at an encoder/decoder
binary, by shelling out to it; otherwise only PNG sequences are
supported.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .model import FrameSequence, ReframeError

FFMPEG_ENV = "RAVA_FFMPEG"
FRAME_PATTERN = "frame_%06d.png"


class FrameIOError(ReframeError):
    """Frames could not be read or written."""


def write_frame_dir(frames: FrameSequence | np.ndarray, out_dir: str | Path) -> list[Path]:
    """Write frames as 8-bit RGB PNGs named frame_000000.png onward."""
    arr = frames.frames if isinstance(frames, FrameSequence) else np.asarray(frames)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(arr):
        path = out / (FRAME_PATTERN % i)
        Image.fromarray(np.ascontiguousarray(frame), mode="RGB").save(path, format="PNG")
        paths.append(path)
    return paths


def read_frame_dir(frames_dir: str | Path, fps: float = 30.0) -> FrameSequence:
    """Read every PNG in a directory, in lexicographic order."""
    d = Path(frames_dir)
    if not d.is_dir():
        raise FrameIOError(f"not a directory: {d}")
    paths = sorted(d.glob("*.png"))
    if not paths:
        raise FrameIOError(f"no PNG frames under {d}")
    frames = []
    first_size = None
    for path in paths:
        try:
            with Image.open(path) as im:
                rgb = im.convert("RGB")
                if first_size is None:
                    first_size = rgb.size
                elif rgb.size != first_size:
                    raise FrameIOError(
                        f"{path.name}: size {rgb.size} differs from {first_size}"
                    )
                frames.append(np.asarray(rgb, dtype=np.uint8))
        except (OSError, ValueError) as exc:
            raise FrameIOError(f"cannot read frame {path}: {exc}") from exc
    return FrameSequence.from_frames(frames, fps=fps)


def _ffmpeg_binary() -> str:
    binary = os.environ.get(FFMPEG_ENV, "")
    if not binary:
        raise FrameIOError(
            f"container formats need an external codec binary; set {FFMPEG_ENV}"
        )
    return binary


def decode_video_file(path: str | Path, fps: float = 30.0) -> FrameSequence:
    """Decode a container file to frames via the external binary."""
    binary = _ffmpeg_binary()
    src = Path(path)
    if not src.is_file():
        raise FrameIOError(f"not a file: {src}")
    with tempfile.TemporaryDirectory(prefix="reframe_decode_") as tmp:
        cmd = [binary, "-y", "-i", str(src), str(Path(tmp) / FRAME_PATTERN)]
        result = subprocess.run(cmd, capture_output=True, text=True)
        if result.returncode != 0:
            raise FrameIOError(f"decoder failed ({result.returncode}): {result.stderr.strip()}")
        return read_frame_dir(tmp, fps=fps)


def encode_video_file(
    frames: FrameSequence, out_path: str | Path, extra_args: Iterable[str] = ()
) -> None:
    """Encode frames into a container file via the external binary."""
    binary = _ffmpeg_binary()
    with tempfile.TemporaryDirectory(prefix="reframe_encode_") as tmp:
        write_frame_dir(frames, tmp)
        cmd = [
            binary,
            "-y",
            "-framerate",
            str(frames.fps),
            "-i",
            str(Path(tmp) / FRAME_PATTERN),
            *extra_args,
            str(out_path),
        ]
        result = subprocess.run(cmd, capture_output=True, text=True)
        if result.returncode != 0:
            raise FrameIOError(f"encoder failed ({result.returncode}): {result.stderr.strip()}")
