"""Hand-crafted gaze features from eye landmarks.

Every landmark p is mapped to (p - c1) / w where c1 is the inner eye
corner and w = ||c2 - c1|| is the scalar eye width, making the features
invariant to image translation and uniform scale (not rotation; an
optional corner-axis rotation can be enabled explicitly).  The full
36-vector is laid out as:

    [0:16]   8 eyelid landmarks, (u, v) each
    [16:32]  8 iris-edge landmarks, (u, v) each
    [32:34]  iris center
    [34:36]  gaze prior: (iris_center - eyeball_center) / w

Reduced configurations for ablation studies keep contiguous slices of
this layout; see FEATURE_CONFIGS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Point2

__all__ = ["EyeLandmarks", "FEATURE_CONFIGS", "feature_dim", "build_features"]


@dataclass(frozen=True)
class EyeLandmarks:
    """One eye's detected landmarks plus its corner pair."""

    inner_corner: Point2
    outer_corner: Point2
    eyelid: tuple[Point2, ...]
    iris_edges: tuple[Point2, ...]
    iris_center: Point2
    eyeball_center: Point2
    radius: float | None = None

    def __post_init__(self) -> None:
        eyelid = tuple(self.eyelid)
        iris = tuple(self.iris_edges)
        if len(eyelid) != 8:
            raise ValueError(f"expected 8 eyelid landmarks, got {len(eyelid)}")
        if len(iris) != 8:
            raise ValueError(f"expected 8 iris-edge landmarks, got {len(iris)}")
        w = math.hypot(
            self.outer_corner.u - self.inner_corner.u,
            self.outer_corner.v - self.inner_corner.v,
        )
        if w <= 0.0:
            raise ValueError("eye corners must be distinct")
        if self.radius is not None and self.radius <= 0:
            raise ValueError(f"projected radius must be positive, got {self.radius}")
        object.__setattr__(self, "eyelid", eyelid)
        object.__setattr__(self, "iris_edges", iris)

    @property
    def eye_width(self) -> float:
        return math.hypot(
            self.outer_corner.u - self.inner_corner.u,
            self.outer_corner.v - self.inner_corner.v,
        )


# name -> feature dimensionality; see build_features for contents.
FEATURE_CONFIGS: dict[str, int] = {
    "pupil": 2,
    "pcec": 4,
    "iris": 18,
    "eyelid-iris": 34,
    "full": 36,
}


def feature_dim(config: str) -> int:
    if config not in FEATURE_CONFIGS:
        raise ValueError(f"unknown feature config {config!r}; choose from {sorted(FEATURE_CONFIGS)}")
    return FEATURE_CONFIGS[config]


def build_features(
    landmarks: EyeLandmarks,
    config: str = "full",
    *,
    rotate_to_corner_axis: bool = False,
) -> np.ndarray:
    """Feature vector for one eye.

    Configurations:

    * ``pupil``        iris center only (2)
    * ``pcec``         iris center relative to both corners (4)
    * ``iris``         iris edges + iris center (18)
    * ``eyelid-iris``  eyelid + iris edges + iris center (34)
    * ``full``         eyelid-iris plus the gaze prior (36)

    With rotate_to_corner_axis=True coordinates are expressed in the
    frame whose x axis runs from the inner to the outer corner, which
    additionally cancels in-plane camera roll.
    """
    dim = feature_dim(config)
    c1 = np.array([landmarks.inner_corner.u, landmarks.inner_corner.v])
    c2 = np.array([landmarks.outer_corner.u, landmarks.outer_corner.v])
    w = float(np.linalg.norm(c2 - c1))
    if w < 1e-6:
        raise ValueError(f"degenerate eye width {w}")

    if rotate_to_corner_axis:
        ex = (c2 - c1) / w
        rot = np.array([[ex[0], ex[1]], [-ex[1], ex[0]]])
    else:
        rot = np.eye(2)

    def rel(p: Point2) -> np.ndarray:
        return rot @ (np.array([p.u, p.v]) - c1) / w

    ic = rel(landmarks.iris_center)
    if config == "pupil":
        out = ic
    elif config == "pcec":
        oc = rot @ (
            np.array([landmarks.iris_center.u, landmarks.iris_center.v]) - c2
        ) / w
        out = np.concatenate([ic, oc])
    else:
        iris = np.concatenate([rel(p) for p in landmarks.iris_edges])
        if config == "iris":
            out = np.concatenate([iris, ic])
        else:
            eyelid = np.concatenate([rel(p) for p in landmarks.eyelid])
            if config == "eyelid-iris":
                out = np.concatenate([eyelid, iris, ic])
            else:  # full
                ec = np.array([landmarks.eyeball_center.u, landmarks.eyeball_center.v])
                prior = rot @ (
                    np.array([landmarks.iris_center.u, landmarks.iris_center.v]) - ec
                ) / w
                out = np.concatenate([eyelid, iris, ic, prior])

    if out.shape != (dim,) or not np.all(np.isfinite(out)):
        raise ValueError(f"feature construction produced invalid vector for {config!r}")
    return out
