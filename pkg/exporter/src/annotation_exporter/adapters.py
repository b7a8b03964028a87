"""Model adapters: tagging, grounded segmentation, caption scoring.

The built-in triple grounds objects by palette color: the tagger
reports which palette colors form candidate regions, the segmenter
extracts the largest connected component per tag, and the scorer
assigns a positional template caption.  Everything is deterministic
and dependency-light; real open-vocabulary models plug in through the
same three call signatures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (200, 40, 40),
    "orange": (230, 140, 40),
    "yellow": (230, 220, 60),
    "green": (60, 180, 70),
    "cyan": (70, 200, 210),
    "blue": (50, 80, 200),
    "purple": (130, 60, 180),
    "pink": (230, 150, 180),
    "brown": (120, 80, 50),
    "white": (240, 240, 240),
    "gray": (128, 128, 128),
    "black": (20, 20, 20),
}

_PALETTE_NAMES = list(PALETTE)
_PALETTE_RGB = np.array([PALETTE[name] for name in _PALETTE_NAMES], dtype=np.float64)
_MAX_DIST = float(np.sqrt(3) * 255.0)

#: A tag must cover at least this fraction of the frame to be reported.
MIN_REGION_FRACTION = 0.005


@dataclass(frozen=True)
class Detection:
    """One grounded region: binary mask plus detection confidence."""

    mask: np.ndarray
    confidence: float


def _nearest_palette(image: np.ndarray) -> np.ndarray:
    pixels = image.astype(np.float64).reshape(-1, 3)
    dists = np.linalg.norm(pixels[:, None, :] - _PALETTE_RGB[None, :, :], axis=2)
    return dists.argmin(axis=1).reshape(image.shape[:2])


def _purity(image: np.ndarray, mask: np.ndarray, anchor: tuple[int, int, int]) -> float:
    region = image[mask].astype(np.float64)
    dist = np.linalg.norm(region - np.array(anchor, dtype=np.float64), axis=1)
    return float(1.0 - dist.mean() / _MAX_DIST)


class ColorBlobTagger:
    """Reports palette colors that form candidate foreground regions.

    Colors claiming three or more frame corners count as background and
    are never tagged.
    """

    def tag(self, image: np.ndarray) -> list[str]:
        index_map = _nearest_palette(image)
        h, w = index_map.shape
        corners = [index_map[0, 0], index_map[0, w - 1],
                   index_map[h - 1, 0], index_map[h - 1, w - 1]]
        background = {c for c in set(corners) if corners.count(c) >= 3}
        counts = np.bincount(index_map.ravel(), minlength=len(_PALETTE_NAMES))
        tags = []
        for idx, name in enumerate(_PALETTE_NAMES):
            if idx in background:
                continue
            if counts[idx] / index_map.size >= MIN_REGION_FRACTION:
                tags.append(name)
        return tags


class ColorRegionSegmenter:
    """Largest connected component of the tag's palette color."""

    def ground(self, image: np.ndarray, tag: str) -> list[Detection]:
        if tag not in PALETTE:
            return []
        index_map = _nearest_palette(image)
        mask = index_map == _PALETTE_NAMES.index(tag)
        if not mask.any():
            return []
        labels, count = ndimage.label(mask)
        sizes = ndimage.sum_labels(mask, labels, index=range(1, count + 1))
        component = labels == (int(np.argmax(sizes)) + 1)
        return [Detection(mask=component, confidence=_purity(image, component, PALETTE[tag]))]


_POSITIONS = (
    ("top left", "top", "top right"),
    ("left", "center", "right"),
    ("bottom left", "bottom", "bottom right"),
)


class PositionTemplateCaptioner:
    """Template caption naming the tag and its frame position."""

    def caption(self, image: np.ndarray, mask: np.ndarray, tag: str) -> tuple[str, float]:
        ys, xs = np.nonzero(mask)
        h, w = mask.shape
        cy = (float(ys.min()) + float(ys.max()) + 1.0) / 2.0
        cx = (float(xs.min()) + float(xs.max()) + 1.0) / 2.0
        row = min(int(cy / h * 3), 2)
        col = min(int(cx / w * 3), 2)
        position = _POSITIONS[row][col]
        score = _purity(image, mask, PALETTE[tag]) if tag in PALETTE else 0.0
        return f"a {tag} object in the {position}", score


TAGGERS = {"color-blob": ColorBlobTagger}
SEGMENTERS = {"color-region": ColorRegionSegmenter}
SCORERS = {"position-template": PositionTemplateCaptioner}
