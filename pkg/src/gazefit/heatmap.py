"""Landmark heatmaps: Gaussian encoding, soft-argmax decoding, and the
squared-error heatmap loss.

A heatmap is a (height, width) confidence grid at 1/scale of image
resolution; the default 75x45 grid at scale 2 corresponds to a 150x90
input image.  Cell (x, y) sits at image coordinates (scale*x, scale*y),
so decoding multiplies grid-space expectations by scale.  A full set is
18 maps, ordered: 8 eyelid landmarks, 8 iris-edge landmarks, iris
center, eyeball center.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .geometry import Point2

__all__ = [
    "LANDMARKS_PER_SET",
    "Heatmap",
    "HeatmapSet",
    "encode",
    "encode_set",
    "soft_argmax",
    "decode_set",
    "heatmap_loss",
    "dump_heatmap",
    "load_heatmap",
]

LANDMARKS_PER_SET = 18

# Landmarks this far outside the image are still encoded (occluded or
# clipped landmarks keep a defined target); farther out is rejected.
_OUTSIDE_MARGIN = 0.25


@dataclass(frozen=True)
class Heatmap:
    """Immutable confidence grid with its image-to-grid scale factor."""

    values: np.ndarray
    scale: float = 2.0

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 2:
            raise ValueError(f"heatmap values must be 2D, got shape {arr.shape}")
        h, w = arr.shape
        if h < 8 or w < 8:
            raise ValueError(f"heatmap dimensions must be at least 8x8, got {w}x{h}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("heatmap values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("heatmap values must lie in [0, 1]")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class HeatmapSet:
    """Exactly 18 heatmaps of identical geometry (one per landmark)."""

    maps: tuple[Heatmap, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        maps = tuple(self.maps)
        if len(maps) != LANDMARKS_PER_SET:
            raise ValueError(f"a heatmap set holds {LANDMARKS_PER_SET} maps, got {len(maps)}")
        first = maps[0]
        for m in maps[1:]:
            if m.width != first.width or m.height != first.height or m.scale != first.scale:
                raise ValueError("all heatmaps in a set must share dimensions and scale")
        object.__setattr__(self, "maps", maps)


def encode(
    landmark: Point2,
    *,
    width: int = 75,
    height: int = 45,
    scale: float = 2.0,
    sigma: float = 2.0,
) -> Heatmap:
    """Render a landmark as a Gaussian bump with peak value 1.

    The Gaussian is centered at the exact sub-pixel position
    landmark/scale in grid coordinates, so the continuous peak is 1 even
    when no cell center coincides with it.  sigma is in grid cells.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if width < 8 or height < 8:
        raise ValueError(f"heatmap dimensions must be at least 8x8, got {width}x{height}")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    img_w = width * scale
    img_h = height * scale
    if not (-_OUTSIDE_MARGIN * img_w <= landmark.u <= (1 + _OUTSIDE_MARGIN) * img_w) or not (
        -_OUTSIDE_MARGIN * img_h <= landmark.v <= (1 + _OUTSIDE_MARGIN) * img_h
    ):
        raise ValueError(
            f"landmark ({landmark.u}, {landmark.v}) is more than 25% outside the "
            f"{img_w}x{img_h} image"
        )
    cx = landmark.u / scale
    cy = landmark.v / scale
    dx2 = (np.arange(width, dtype=np.float64) - cx) ** 2
    dy2 = (np.arange(height, dtype=np.float64) - cy) ** 2
    values = np.exp(-(dy2[:, None] + dx2[None, :]) / (2.0 * sigma * sigma))
    return Heatmap(values, scale)


def encode_set(
    landmarks: Sequence[Point2],
    *,
    width: int = 75,
    height: int = 45,
    scale: float = 2.0,
    sigma: float = 2.0,
) -> HeatmapSet:
    """Encode the 18 landmarks of one eye (see module docstring for order)."""
    if len(landmarks) != LANDMARKS_PER_SET:
        raise ValueError(f"expected {LANDMARKS_PER_SET} landmarks, got {len(landmarks)}")
    return HeatmapSet(
        tuple(encode(p, width=width, height=height, scale=scale, sigma=sigma) for p in landmarks)
    )


def soft_argmax(
    heatmap: Heatmap,
    *,
    temperature: float = 10.0,
    support_fraction: float = 0.01,
) -> Point2:
    """Differentiable peak localization, returned in image pixels.

    Computes the expectation of the grid coordinates under
    softmax(temperature * values) and multiplies by scale.  Cells below
    support_fraction * max are excluded from the softmax: a 75x45 grid
    holds thousands of zero-confidence cells whose uniform softmax mass
    would otherwise drag the estimate toward the grid centroid.  Pass
    support_fraction=0 for the textbook softmax over every cell.

    A constant heatmap (including all-zero) decodes to the grid centroid.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if not 0.0 <= support_fraction < 1.0:
        raise ValueError(f"support_fraction must lie in [0, 1), got {support_fraction}")
    vals = heatmap.values
    vmax = vals.max()
    if support_fraction > 0.0 and vmax > 0.0:
        mask = vals >= support_fraction * vmax
    else:
        mask = np.ones_like(vals, dtype=bool)
    w = np.where(mask, np.exp(temperature * (vals - vmax)), 0.0)
    total = w.sum()
    xs = np.arange(heatmap.width, dtype=np.float64)
    ys = np.arange(heatmap.height, dtype=np.float64)
    gx = float((w.sum(axis=0) @ xs) / total)
    gy = float((w.sum(axis=1) @ ys) / total)
    return Point2(heatmap.scale * gx, heatmap.scale * gy)


def decode_set(
    heatmaps: HeatmapSet,
    *,
    temperature: float = 10.0,
    support_fraction: float = 0.01,
) -> list[Point2]:
    """Soft-argmax every map of a set, preserving landmark order."""
    return [
        soft_argmax(m, temperature=temperature, support_fraction=support_fraction)
        for m in heatmaps.maps
    ]


def heatmap_loss(predicted: HeatmapSet, truth: HeatmapSet, alpha: float = 1.0) -> float:
    """Sum of per-cell squared differences over all maps, weighted by alpha."""
    pm, tm = predicted.maps, truth.maps
    if pm[0].width != tm[0].width or pm[0].height != tm[0].height:
        raise ValueError(
            f"heatmap dimensions differ: {pm[0].width}x{pm[0].height} vs "
            f"{tm[0].width}x{tm[0].height}"
        )
    total = 0.0
    for p, t in zip(pm, tm):
        d = p.values - t.values
        total += float(np.sum(d * d))
    return alpha * total


def dump_heatmap(heatmap: Heatmap, stream: TextIO) -> None:
    """Write a heatmap as text: 'width height scale' then one grid row per line.

    Floats are written with repr so a dump/load round trip is bit-exact.
    """
    stream.write(f"{heatmap.width} {heatmap.height} {heatmap.scale!r}\n")
    for row in heatmap.values:
        stream.write(" ".join(repr(v) for v in row.tolist()))
        stream.write("\n")


def load_heatmap(stream: TextIO | io.StringIO) -> Heatmap:
    """Read a heatmap written by :func:`dump_heatmap`."""
    header = stream.readline().split()
    if len(header) != 3:
        raise ValueError(f"malformed heatmap header: {header!r}")
    width, height = int(header[0]), int(header[1])
    scale = float(header[2])
    rows = []
    for _ in range(height):
        line = stream.readline()
        if not line:
            raise ValueError("truncated heatmap dump")
        row = np.array([float(t) for t in line.split()], dtype=np.float64)
        if row.shape[0] != width:
            raise ValueError(f"expected {width} values per row, got {row.shape[0]}")
        rows.append(row)
    return Heatmap(np.vstack(rows), scale)
