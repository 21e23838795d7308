"""Shared pixel and gaze-angle conventions.

Image coordinates follow the usual raster convention: u grows rightward,
v grows downward, origin at the top-left corner.  Gaze is carried as
(pitch, yaw) in radians.  Positive pitch moves the projected iris
downward in the image; positive yaw moves it toward negative u.  The
matching 3D gaze vector points out of the screen toward the camera, so
its z component is negative whenever |pitch| and |yaw| are below pi/2,
and the orthographic projection of the vector onto the image plane is
exactly its (x, y) truncation.

All angles everywhere in this package are radians; degrees appear only
in report output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PITCH_LIMIT",
    "Point2",
    "GazeAngles",
    "GazeVector",
    "angles_to_vector",
    "vector_to_angles",
    "angular_distance",
    "angular_error",
]

# Pitch must stay strictly inside (-pi/2, pi/2): at the poles yaw is
# undefined and the projection model degenerates.
PITCH_LIMIT = math.pi / 2.0


@dataclass(frozen=True)
class Point2:
    """A point in image pixels (u rightward, v downward)."""

    u: float
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError(f"point coordinates must be finite, got ({self.u}, {self.v})")


@dataclass(frozen=True)
class GazeAngles:
    """Gaze direction as eyeball pitch and yaw, radians."""

    pitch: float
    yaw: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.pitch) and math.isfinite(self.yaw)):
            raise ValueError(f"gaze angles must be finite, got ({self.pitch}, {self.yaw})")
        if abs(self.pitch) >= PITCH_LIMIT:
            raise ValueError(f"pitch {self.pitch!r} outside the open interval (-pi/2, pi/2)")


@dataclass(frozen=True)
class GazeVector:
    """Unit 3D gaze vector; gz < 0 means looking toward the camera."""

    gx: float
    gy: float
    gz: float

    def __post_init__(self) -> None:
        n = math.sqrt(self.gx * self.gx + self.gy * self.gy + self.gz * self.gz)
        if not math.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise ValueError(f"gaze vector must have unit norm, got |g| = {n!r}")


def angles_to_vector(g: GazeAngles) -> GazeVector:
    """Unit gaze vector for (pitch, yaw).

    The mapping is (-cos(pitch)*sin(yaw), sin(pitch), -cos(pitch)*cos(yaw)),
    which keeps the image-plane projection of the vector equal to the iris
    displacement direction used by the eyeball model: positive pitch moves
    the iris down (v grows downward), positive yaw moves it toward -u.
    """
    cp = math.cos(g.pitch)
    return GazeVector(-cp * math.sin(g.yaw), math.sin(g.pitch), -cp * math.cos(g.yaw))


def vector_to_angles(v: GazeVector) -> GazeAngles:
    """Inverse of :func:`angles_to_vector` for camera-facing vectors."""
    return GazeAngles(math.asin(max(-1.0, min(1.0, v.gy))), math.atan2(-v.gx, -v.gz))


def angular_distance(pitch_a: float, yaw_a: float, pitch_b: float, yaw_b: float) -> float:
    """Angle in [0, pi] between the gaze vectors of two (pitch, yaw) pairs.

    Unvalidated scalar form for metric code that has to tolerate regressor
    output drifting out of the typed pitch range; prefer
    :func:`angular_error` when both values are proper :class:`GazeAngles`.
    """
    ca, cb = math.cos(pitch_a), math.cos(pitch_b)
    ax, ay, az = ca * math.sin(yaw_a), math.sin(pitch_a), ca * math.cos(yaw_a)
    bx, by, bz = cb * math.sin(yaw_b), math.sin(pitch_b), cb * math.cos(yaw_b)
    dot = ax * bx + ay * by + az * bz
    cross = math.sqrt(
        (ay * bz - az * by) ** 2 + (az * bx - ax * bz) ** 2 + (ax * by - ay * bx) ** 2
    )
    # atan2 of cross/dot, not acos of dot: acos loses half the significand
    # near coincident vectors, where calibration errors live.
    return math.atan2(cross, dot)


def angular_error(a: GazeAngles, b: GazeAngles) -> float:
    """Angular error between two gaze directions, radians in [0, pi]."""
    return angular_distance(a.pitch, a.yaw, b.pitch, b.yaw)
