"""Content-based shot detection over RGB frame sequences.

A frame-to-frame content score is the mean, over pixels, of the average
absolute difference of the H, S and V channels with every channel
scaled to [0, 255].  A cut is declared before frame ``i`` when the
score reaches the ``alpha1`` threshold and the scene under construction
is already at least ``alpha2`` frames long.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    DimensionMismatchError,
    FrameSequence,
    Scene,
    SceneDetectConfig,
)

#: Period of the 8-bit hue channel; hue distance wraps at this value.
HUE_PERIOD = 256.0


@dataclass(frozen=True)
class ContentScore:
    """Score of the transition into frame ``frame_index`` (>= 1)."""

    frame_index: int
    score: float


def _hsv255(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RGB uint8 -> (H, S, V) float64 planes, all scaled to [0, 255].

    Hue lives in [0, HUE_PERIOD) and is 0 for achromatic pixels, as is
    saturation, so black-to-white transitions differ only in V.
    """
    rgb = frame.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    delta = maxc - minc

    v = maxc
    s = np.divide(delta, maxc, out=np.zeros_like(maxc), where=maxc > 0) * 255.0

    safe = np.where(delta > 0, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h6 = np.select(
        [r == maxc, g == maxc],
        [bc - gc, 2.0 + rc - bc],
        default=4.0 + gc - rc,
    )
    h = np.where(delta > 0, (h6 / 6.0) % 1.0, 0.0) * HUE_PERIOD
    return h, s, v


def content_score(prev: np.ndarray, cur: np.ndarray) -> float:
    """Mean per-pixel (|dH| + |dS| + |dV|) / 3 between two RGB frames.

    Hue difference is circular: min(|dH|, HUE_PERIOD - |dH|).
    """
    if prev.shape != cur.shape:
        raise DimensionMismatchError(prev.shape, cur.shape, "frame")
    h1, s1, v1 = _hsv255(prev)
    h2, s2, v2 = _hsv255(cur)
    dh = np.abs(h1 - h2)
    dh = np.minimum(dh, HUE_PERIOD - dh)
    return float(np.mean((dh + np.abs(s1 - s2) + np.abs(v1 - v2)) / 3.0))


def content_scores(video: FrameSequence) -> list[ContentScore]:
    """Score every consecutive frame pair of the video."""
    return [
        ContentScore(i, content_score(video.frames[i - 1], video.frames[i]))
        for i in range(1, len(video))
    ]


def detect_scenes(video: FrameSequence, cfg: SceneDetectConfig) -> list[Scene]:
    """Split a video into scenes tiling [0, frame_count).

    A cut before frame ``i`` requires score >= cfg.alpha1 and at least
    cfg.alpha2 frames in the scene under construction; suppressed cuts
    do not reset the scene start, so every non-final scene has length
    >= cfg.alpha2.
    """
    n = len(video)
    boundaries = [0]
    start = 0
    for cs in content_scores(video):
        if cs.score >= cfg.alpha1 and cs.frame_index - start >= cfg.alpha2:
            boundaries.append(cs.frame_index)
            start = cs.frame_index
    boundaries.append(n)
    return [
        Scene(index=k, start=boundaries[k], end=boundaries[k + 1])
        for k in range(len(boundaries) - 1)
    ]
