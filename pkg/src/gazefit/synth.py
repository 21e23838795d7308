"""Synthetic landmark-level ground truth.

Person parameters are drawn once per identity (eyeball radius and
center, angular iris radius, roll bias, optical-to-visual kappa offset,
corner geometry, eyelid shape).  Each record renders the iris landmarks
through the spherical forward model, builds eyelids as two quadratic
arcs through the corners whose upper-lid openness varies linearly with
pitch, then corrupts geometry with difficulty-scaled noise: per-landmark
Gaussian jitter first, one global similarity transform (translation,
rotation, scale about the frame center) second.  The similarity
transform is applied consistently to every point, the eyeball geometry,
and the projected iris radius; gaze labels are never touched by noise.

Records serialize one JSON object per line with floats at 9 significant
digits, so datasets are byte-identical across runs and platforms.
Coordinates are pixels, origin top-left, v down; angles are radians.

Only geometric noise is modelled.  Appearance-level corruption
(intensity, blur, resampling) has no landmark analogue here and is
folded into the jitter term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .eyeball import EyeballObservation, EyeballState, project_iris_center, project_iris_edges
from .features import EyeLandmarks
from .geometry import GazeAngles, Point2

__all__ = [
    "FRAME_WIDTH",
    "FRAME_HEIGHT",
    "DEFAULT_GAZE_RANGE",
    "PersonSpec",
    "NoiseSpec",
    "SampleRecord",
    "sample_person",
    "eyelid_points",
    "eyelid_openness",
    "generate",
    "generate_dataset",
    "difficulty_at_step",
    "to_observation",
    "sig9",
    "record_to_obj",
    "obj_to_record",
    "write_dataset",
    "read_dataset",
]

FRAME_WIDTH = 150.0
FRAME_HEIGHT = 90.0
_FRAME_CENTER = (FRAME_WIDTH / 2.0, FRAME_HEIGHT / 2.0)

DEFAULT_GAZE_RANGE = math.radians(35.0)

# Upper-lid openness response to pitch, openness = 1 - slope * pitch.
_OPENNESS_SLOPE = 0.6
_KAPPA_SIGMA = math.radians(1.5)

_EYELID_T = np.array([0.2, 0.4, 0.6, 0.8])


@dataclass(frozen=True)
class PersonSpec:
    """Identity-level generator parameters, fixed across a person's records."""

    person_id: int
    side: str
    radius: float
    iris_angular_radius: float
    roll_bias: float
    kappa_pitch: float
    kappa_yaw: float
    eyeball_center: Point2
    inner_corner: Point2
    outer_corner: Point2
    upper_bulge: float
    lower_bulge: float

    def __post_init__(self) -> None:
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not 0.0 < self.iris_angular_radius < math.pi / 2:
            raise ValueError(
                f"iris angular radius must lie in (0, pi/2), got {self.iris_angular_radius}"
            )
        du = self.outer_corner.u - self.inner_corner.u
        dv = self.outer_corner.v - self.inner_corner.v
        if math.hypot(du, dv) <= 0.0:
            raise ValueError("eye corners must be separated")


@dataclass(frozen=True)
class NoiseSpec:
    """Difficulty-scaled corruption; ranges are the difficulty-1 amplitudes."""

    difficulty: float = 0.0
    jitter_sigma: float = 1.0
    translation_range: float = 10.0
    rotation_range: float = 0.1
    scale_range: float = 0.1
    seed: int | tuple[int, ...] = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.difficulty <= 1.0:
            raise ValueError(f"difficulty must lie in [0, 1], got {self.difficulty}")
        for name in ("jitter_sigma", "translation_range", "rotation_range", "scale_range"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class SampleRecord:
    """One generated eye: landmarks, labels, and the noise actually applied.

    ``gaze_optical`` is the eyeball pose driving the forward model;
    ``gaze_visual`` is that pose plus the person's kappa offset and is
    the label the regression experiments target.  ``truth_iris_center``
    and ``truth_eyelid`` are the noise-free landmark positions after the
    record's global transform, for localization metrics.
    """

    record_id: int
    person_id: int
    side: str
    landmarks: EyeLandmarks
    gaze_optical: GazeAngles
    gaze_visual: GazeAngles
    r_uv: float
    difficulty: float
    noise_meta: dict
    truth_iris_center: Point2
    truth_eyelid: tuple[Point2, ...]


def sample_person(seed: int | tuple[int, ...], person_id: int = 0) -> PersonSpec:
    """Draw one identity; deterministic in (seed, person_id).

    Radius ~ U[50, 70] px, angular iris radius ~ U[0.45, 0.55] rad, roll
    bias ~ N(0, 0.05 rad), kappa ~ N(0, 1.5 deg) per axis, eyeball
    center near the frame center, corners spanning most of the eyeball.
    """
    rng = np.random.default_rng(seed)
    radius = float(rng.uniform(50.0, 70.0))
    delta = float(rng.uniform(0.45, 0.55))
    roll_bias = float(rng.normal(0.0, 0.05))
    kappa_pitch = float(rng.normal(0.0, _KAPPA_SIGMA))
    kappa_yaw = float(rng.normal(0.0, _KAPPA_SIGMA))
    xc = _FRAME_CENTER[0] + float(rng.uniform(-3.0, 3.0))
    yc = _FRAME_CENTER[1] + float(rng.uniform(-2.0, 2.0))
    half_span = radius * float(rng.uniform(0.85, 0.95))
    inner_drop = radius * float(rng.uniform(0.0, 0.08))
    outer_rise = radius * float(rng.uniform(0.0, 0.05))
    upper_bulge = float(rng.uniform(0.28, 0.38))
    lower_bulge = float(rng.uniform(0.16, 0.24))
    side = "right" if int(rng.integers(0, 2)) else "left"
    sign = 1.0 if side == "right" else -1.0
    return PersonSpec(
        person_id=person_id,
        side=side,
        radius=radius,
        iris_angular_radius=delta,
        roll_bias=roll_bias,
        kappa_pitch=kappa_pitch,
        kappa_yaw=kappa_yaw,
        eyeball_center=Point2(xc, yc),
        inner_corner=Point2(xc + sign * half_span, yc + inner_drop),
        outer_corner=Point2(xc - sign * half_span, yc - outer_rise),
        upper_bulge=upper_bulge,
        lower_bulge=lower_bulge,
    )


def eyelid_openness(pitch: float) -> float:
    """Upper-lid opening factor, linear in pitch (1 at straight gaze)."""
    return 1.0 - _OPENNESS_SLOPE * pitch


def eyelid_points(person: PersonSpec, pitch: float) -> list[Point2]:
    """Eight eyelid landmarks: four on the upper arc, four on the lower.

    Each arc runs inner corner to outer corner with a 4t(1-t) vertical
    bump; the upper amplitude scales with openness, the lower is fixed.
    """
    c1, c2 = person.inner_corner, person.outer_corner
    width = math.hypot(c2.u - c1.u, c2.v - c1.v)
    up_amp = person.upper_bulge * 0.5 * width * eyelid_openness(pitch)
    low_amp = person.lower_bulge * 0.5 * width
    pts = []
    for t in _EYELID_T:
        bump = 4.0 * t * (1.0 - t)
        pts.append(
            Point2(c1.u + t * (c2.u - c1.u), c1.v + t * (c2.v - c1.v) - up_amp * bump)
        )
    for t in _EYELID_T:
        bump = 4.0 * t * (1.0 - t)
        pts.append(
            Point2(c1.u + t * (c2.u - c1.u), c1.v + t * (c2.v - c1.v) + low_amp * bump)
        )
    return pts


def _transform_points(
    pts: np.ndarray, scale: float, rotation: float, translation: np.ndarray
) -> np.ndarray:
    """Similarity transform about the frame center, (n, 2) -> (n, 2)."""
    cr, sr = math.cos(rotation), math.sin(rotation)
    rot = np.array([[cr, -sr], [sr, cr]])
    center = np.array(_FRAME_CENTER)
    return (pts - center) @ (scale * rot).T + center + translation


def generate(person: PersonSpec, gaze: GazeAngles, noise: NoiseSpec, record_id: int = 0) -> SampleRecord:
    """Render one record for a person looking along the given optical axis."""
    state = EyeballState(
        gaze=gaze, roll=person.roll_bias, iris_radius=person.iris_angular_radius
    )
    xc, yc, r = person.eyeball_center.u, person.eyeball_center.v, person.radius
    iris_center = project_iris_center(state, person.eyeball_center, r)
    iris_edges = project_iris_edges(state, person.eyeball_center, r)
    lids = eyelid_points(person, gaze.pitch)
    r_uv = r * math.sin(person.iris_angular_radius)

    # Landmarks in detector order: corners, eyelid, iris edges, iris center.
    clean = np.array(
        [(p.u, p.v) for p in (person.inner_corner, person.outer_corner, *lids, *iris_edges, iris_center)]
    )

    rng = np.random.default_rng(noise.seed)
    d = noise.difficulty
    sigma = d * noise.jitter_sigma
    jitter = rng.normal(0.0, 1.0, size=clean.shape) * sigma
    translation = rng.uniform(-1.0, 1.0, size=2) * (d * noise.translation_range)
    rotation = float(rng.uniform(-1.0, 1.0)) * (d * noise.rotation_range)
    scale = 1.0 + float(rng.uniform(-1.0, 1.0)) * (d * noise.scale_range)

    observed = _transform_points(clean + jitter, scale, rotation, translation)
    truth = _transform_points(clean, scale, rotation, translation)
    ball = _transform_points(np.array([[xc, yc]]), scale, rotation, translation)[0]

    landmarks = EyeLandmarks(
        inner_corner=Point2(*observed[0]),
        outer_corner=Point2(*observed[1]),
        eyelid=tuple(Point2(*p) for p in observed[2:10]),
        iris_edges=tuple(Point2(*p) for p in observed[10:18]),
        iris_center=Point2(*observed[18]),
        eyeball_center=Point2(*ball),
        radius=scale * r,
    )
    visual = GazeAngles(gaze.pitch + person.kappa_pitch, gaze.yaw + person.kappa_yaw)
    return SampleRecord(
        record_id=record_id,
        person_id=person.person_id,
        side=person.side,
        landmarks=landmarks,
        gaze_optical=gaze,
        gaze_visual=visual,
        r_uv=scale * r_uv,
        difficulty=d,
        noise_meta={
            "jitter_sigma": sigma,
            "translation": [float(translation[0]), float(translation[1])],
            "rotation": rotation,
            "scale": scale,
        },
        truth_iris_center=Point2(*truth[18]),
        truth_eyelid=tuple(Point2(*p) for p in truth[2:10]),
    )


def generate_dataset(
    n_people: int,
    n_per_person: int,
    gaze_range: float | tuple[float, float] = DEFAULT_GAZE_RANGE,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
) -> list[SampleRecord]:
    """Sample people then records; record ids run 0..n_people*n_per_person-1.

    Gaze is uniform over the +/-gaze_range pitch/yaw box (a scalar range
    applies to both axes).  Every random draw is keyed by (seed, stream,
    person, sample), so any record can be regenerated independently.
    """
    if n_people <= 0 or n_per_person <= 0:
        raise ValueError("n_people and n_per_person must be positive")
    if isinstance(gaze_range, tuple):
        pitch_range, yaw_range = gaze_range
    else:
        pitch_range = yaw_range = float(gaze_range)
    records = []
    for p in range(n_people):
        person = sample_person((seed, 0, p), person_id=p)
        for i in range(n_per_person):
            gaze_rng = np.random.default_rng((seed, 1, p, i))
            gaze = GazeAngles(
                float(gaze_rng.uniform(-pitch_range, pitch_range)),
                float(gaze_rng.uniform(-yaw_range, yaw_range)),
            )
            record_noise = NoiseSpec(
                difficulty=noise.difficulty,
                jitter_sigma=noise.jitter_sigma,
                translation_range=noise.translation_range,
                rotation_range=noise.rotation_range,
                scale_range=noise.scale_range,
                seed=(seed, 2, p, i),
            )
            records.append(
                generate(person, gaze, record_noise, record_id=p * n_per_person + i)
            )
    return records


def difficulty_at_step(step: int, total_steps: int) -> float:
    """Linear curriculum from 0 at step 0 to 1 at total_steps."""
    if total_steps <= 0:
        raise ValueError(f"total_steps must be positive, got {total_steps}")
    return min(max(step / total_steps, 0.0), 1.0)


def to_observation(record: SampleRecord) -> EyeballObservation:
    """Adapter from a record to the eyeball fitting input."""
    lm = record.landmarks
    if lm.radius is None:
        raise ValueError("record lacks an eyeball radius; cannot build an observation")
    return EyeballObservation(
        eyeball_center=lm.eyeball_center,
        radius=lm.radius,
        iris_center=lm.iris_center,
        iris_edges=lm.iris_edges,
    )


def sig9(x: float) -> float:
    """Round to 9 significant digits; applied to every serialized float."""
    return float(format(float(x), ".9g"))


def _pt(p: Point2) -> list[float]:
    return [sig9(p.u), sig9(p.v)]


def record_to_obj(rec: SampleRecord) -> dict:
    lm = rec.landmarks
    return {
        "id": rec.record_id,
        "person_id": rec.person_id,
        "side": rec.side,
        "corners": {"inner": _pt(lm.inner_corner), "outer": _pt(lm.outer_corner)},
        "eyelid": [_pt(p) for p in lm.eyelid],
        "iris": [_pt(p) for p in lm.iris_edges],
        "iris_center": _pt(lm.iris_center),
        "eyeball_center": _pt(lm.eyeball_center),
        "radius_px": sig9(lm.radius),
        "gaze_optical": [sig9(rec.gaze_optical.pitch), sig9(rec.gaze_optical.yaw)],
        "gaze_visual": [sig9(rec.gaze_visual.pitch), sig9(rec.gaze_visual.yaw)],
        "difficulty": sig9(rec.difficulty),
        "r_uv": sig9(rec.r_uv),
        "noise": {
            "jitter_sigma": sig9(rec.noise_meta["jitter_sigma"]),
            "translation": [sig9(v) for v in rec.noise_meta["translation"]],
            "rotation": sig9(rec.noise_meta["rotation"]),
            "scale": sig9(rec.noise_meta["scale"]),
        },
        "truth": {
            "iris_center": _pt(rec.truth_iris_center),
            "eyelid": [_pt(p) for p in rec.truth_eyelid],
        },
    }


def write_dataset(records: Iterable[SampleRecord], stream: TextIO) -> None:
    """One record per line; key order and float formatting are fixed."""
    for rec in records:
        stream.write(json.dumps(record_to_obj(rec), separators=(",", ":")) + "\n")


def obj_to_record(obj: dict) -> SampleRecord:
    landmarks = EyeLandmarks(
        inner_corner=Point2(*obj["corners"]["inner"]),
        outer_corner=Point2(*obj["corners"]["outer"]),
        eyelid=tuple(Point2(*p) for p in obj["eyelid"]),
        iris_edges=tuple(Point2(*p) for p in obj["iris"]),
        iris_center=Point2(*obj["iris_center"]),
        eyeball_center=Point2(*obj["eyeball_center"]),
        radius=float(obj["radius_px"]),
    )
    truth = obj.get("truth", {})
    noise = obj.get("noise", {})
    return SampleRecord(
        record_id=int(obj["id"]),
        person_id=int(obj["person_id"]),
        side=obj["side"],
        landmarks=landmarks,
        gaze_optical=GazeAngles(*obj["gaze_optical"]),
        gaze_visual=GazeAngles(*obj["gaze_visual"]),
        r_uv=float(obj.get("r_uv", 0.0)),
        difficulty=float(obj["difficulty"]),
        noise_meta=noise,
        truth_iris_center=Point2(*truth["iris_center"]) if truth else landmarks.iris_center,
        truth_eyelid=tuple(Point2(*p) for p in truth["eyelid"]) if truth else landmarks.eyelid,
    )


def read_dataset(stream: TextIO) -> list[SampleRecord]:
    """Inverse of :func:`write_dataset`; skips blank lines."""
    records = []
    for line in stream:
        line = line.strip()
        if line:
            records.append(obj_to_record(json.loads(line)))
    return records
