"""Two-sphere eyeball model: forward projection and inverse fitting.

The eyeball is a sphere of projected radius r pixels centered at
(x_c, y_c) in the image; the iris is a circle on the sphere whose center
sits at angular position (pitch, yaw) from the optical axis and whose
rim lies at angular distance iris_radius (radians on the sphere).  Under
orthographic projection the iris center lands at

    u = x_c - r * cos(pitch) * sin(yaw)
    v = y_c + r * sin(pitch)

and rim point j (j = 1..8) at the same expression evaluated at the
perturbed angles

    pitch_j = pitch + iris_radius * sin(pi*j/4 + roll)
    yaw_j   = yaw   + iris_radius * cos(pi*j/4 + roll)

where roll rotates the 8-point template around the iris center.
Fitting inverts this 4-parameter model against 9 observed points (iris
center plus 8 rim points, correspondence known) by nonlinear least
squares on the 18 coordinate residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import PITCH_LIMIT, GazeAngles, Point2
from .solvers import levenberg_marquardt, nonlinear_cg

__all__ = [
    "N_EDGE_POINTS",
    "EyeballObservation",
    "EyeballState",
    "FitResult",
    "PersonCalibration",
    "SolverConfig",
    "project_iris_center",
    "project_iris_edges",
    "residual_sum",
    "initial_parameters",
    "fit",
    "fit_many",
    "calibrate",
    "apply_calibration",
]

N_EDGE_POINTS = 8

# Keep pitch strictly inside the gimbal-safe interval during optimization
# so results always construct a valid GazeAngles.
_PITCH_BOUND = PITCH_LIMIT - 1e-9


@dataclass(frozen=True)
class EyeballObservation:
    """Observed projection of one eye: center/radius plus 9 iris points."""

    eyeball_center: Point2
    radius: float
    iris_center: Point2
    iris_edges: tuple[Point2, ...]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"projected eyeball radius must be positive, got {self.radius}")
        edges = tuple(self.iris_edges)
        if len(edges) != N_EDGE_POINTS:
            raise ValueError(f"expected {N_EDGE_POINTS} iris edge points, got {len(edges)}")
        object.__setattr__(self, "iris_edges", edges)


@dataclass(frozen=True)
class EyeballState:
    """Model parameters: gaze angles, template roll, angular iris radius."""

    gaze: GazeAngles
    roll: float
    iris_radius: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.roll):
            raise ValueError("roll must be finite")
        if not (math.isfinite(self.iris_radius) and 0 < self.iris_radius < PITCH_LIMIT):
            raise ValueError(
                f"angular iris radius must lie in (0, pi/2), got {self.iris_radius}"
            )


@dataclass(frozen=True)
class FitResult:
    state: EyeballState
    residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PersonCalibration:
    """Additive per-person offsets mapping optical-axis fits to visual axis."""

    pitch_offset: float
    yaw_offset: float


@dataclass(frozen=True)
class SolverConfig:
    solver: str = "lm"
    max_iters: int = 200
    tol_grad: float = 1e-10
    tol_step: float = 1e-12
    delta_min: float = 0.01
    delta_max: float = 1.2

    def __post_init__(self) -> None:
        if self.solver not in ("lm", "cg"):
            raise ValueError(f"solver must be 'lm' or 'cg', got {self.solver!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.delta_min < self.delta_max:
            raise ValueError("require 0 < delta_min < delta_max")


_TEMPLATE_PHASE = np.pi / 4.0 * np.arange(1, N_EDGE_POINTS + 1)


def _forward(params: np.ndarray, xc: np.ndarray, yc: np.ndarray, r: np.ndarray):
    """All 9 projected points for a (n, 4) parameter batch -> (n, 9, 2)."""
    pitch, yaw, roll, delta = params[:, 0], params[:, 1], params[:, 2], params[:, 3]
    a = _TEMPLATE_PHASE[None, :] + roll[:, None]
    pitch_all = np.concatenate([pitch[:, None], pitch[:, None] + delta[:, None] * np.sin(a)], axis=1)
    yaw_all = np.concatenate([yaw[:, None], yaw[:, None] + delta[:, None] * np.cos(a)], axis=1)
    u = xc[:, None] - r[:, None] * np.cos(pitch_all) * np.sin(yaw_all)
    v = yc[:, None] + r[:, None] * np.sin(pitch_all)
    return np.stack([u, v], axis=2)


def _residual_batch(params: np.ndarray, xc, yc, r, observed: np.ndarray) -> np.ndarray:
    """(n, 18) residuals, point-major with u before v."""
    pred = _forward(params, xc, yc, r)
    return (pred - observed).reshape(params.shape[0], 2 * (N_EDGE_POINTS + 1))


def _jacobian_batch(params: np.ndarray, xc, yc, r) -> np.ndarray:
    """(n, 18, 4) analytic Jacobian matching :func:`_residual_batch`."""
    n = params.shape[0]
    pitch, yaw, roll, delta = params[:, 0], params[:, 1], params[:, 2], params[:, 3]
    a = _TEMPLATE_PHASE[None, :] + roll[:, None]
    sin_a, cos_a = np.sin(a), np.cos(a)
    pitch_all = np.concatenate([pitch[:, None], pitch[:, None] + delta[:, None] * sin_a], axis=1)
    yaw_all = np.concatenate([yaw[:, None], yaw[:, None] + delta[:, None] * cos_a], axis=1)
    sp, cp = np.sin(pitch_all), np.cos(pitch_all)
    sy, cy = np.sin(yaw_all), np.cos(yaw_all)
    rb = r[:, None]
    du_dp = rb * sp * sy          # du/d(pitch_all)
    du_dy = -rb * cp * cy         # du/d(yaw_all)
    dv_dp = rb * cp               # dv/d(pitch_all)

    # Chain through pitch_all = pitch + delta*sin(a), yaw_all = yaw + delta*cos(a);
    # the first column (iris center) has no roll/delta dependence.
    zeros = np.zeros((n, 1))
    dp_droll = np.concatenate([zeros, delta[:, None] * cos_a], axis=1)
    dy_droll = np.concatenate([zeros, -delta[:, None] * sin_a], axis=1)
    dp_ddelta = np.concatenate([zeros, sin_a], axis=1)
    dy_ddelta = np.concatenate([zeros, cos_a], axis=1)

    ju = np.stack(
        [du_dp, du_dy, du_dp * dp_droll + du_dy * dy_droll, du_dp * dp_ddelta + du_dy * dy_ddelta],
        axis=2,
    )
    jv = np.stack(
        [dv_dp, np.zeros_like(dv_dp), dv_dp * dp_droll, dv_dp * dp_ddelta],
        axis=2,
    )
    return np.stack([ju, jv], axis=2).reshape(n, 2 * (N_EDGE_POINTS + 1), 4)


def _observation_arrays(observations: Sequence[EyeballObservation]):
    n = len(observations)
    xc = np.empty(n)
    yc = np.empty(n)
    r = np.empty(n)
    pts = np.empty((n, N_EDGE_POINTS + 1, 2))
    for i, obs in enumerate(observations):
        xc[i] = obs.eyeball_center.u
        yc[i] = obs.eyeball_center.v
        r[i] = obs.radius
        pts[i, 0] = (obs.iris_center.u, obs.iris_center.v)
        for j, e in enumerate(obs.iris_edges):
            pts[i, j + 1] = (e.u, e.v)
    return xc, yc, r, pts


def project_iris_center(state: EyeballState, eyeball_center: Point2, radius: float) -> Point2:
    """Image position of the iris center under the forward model."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    cp = math.cos(state.gaze.pitch)
    return Point2(
        eyeball_center.u - radius * cp * math.sin(state.gaze.yaw),
        eyeball_center.v + radius * math.sin(state.gaze.pitch),
    )


def project_iris_edges(
    state: EyeballState, eyeball_center: Point2, radius: float
) -> tuple[Point2, ...]:
    """Image positions of the 8 iris rim points, j = 1..8."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    out = []
    for j in range(1, N_EDGE_POINTS + 1):
        a = math.pi * j / 4.0 + state.roll
        pj = state.gaze.pitch + state.iris_radius * math.sin(a)
        yj = state.gaze.yaw + state.iris_radius * math.cos(a)
        out.append(
            Point2(
                eyeball_center.u - radius * math.cos(pj) * math.sin(yj),
                eyeball_center.v + radius * math.sin(pj),
            )
        )
    return tuple(out)


def residual_sum(state: EyeballState, observation: EyeballObservation) -> float:
    """Sum of squared coordinate differences over all 9 points (px^2)."""
    params = np.array(
        [[state.gaze.pitch, state.gaze.yaw, state.roll, state.iris_radius]]
    )
    xc, yc, r, pts = _observation_arrays([observation])
    res = _residual_batch(params, xc, yc, r, pts)[0]
    return float(res @ res)


def initial_parameters(observation: EyeballObservation) -> np.ndarray:
    """Closed-form starting point (pitch, yaw, roll, iris_radius).

    Pitch and yaw invert the iris-center projection directly (clamped to
    the valid asin domain, so centers reported outside the eyeball disc
    still produce a usable start); roll starts at 0 and the angular iris
    radius from the mean rim distance.
    """
    xc, yc, r, pts = _observation_arrays([observation])
    return _initial_batch(xc, yc, r, pts)[0]


def _initial_batch(xc, yc, r, pts) -> np.ndarray:
    n = xc.shape[0]
    pitch0 = np.arcsin(np.clip((pts[:, 0, 1] - yc) / r, -1.0, 1.0))
    cp = np.maximum(np.cos(pitch0), 1e-9)
    yaw0 = np.arcsin(np.clip(-(pts[:, 0, 0] - xc) / (r * cp), -1.0, 1.0))
    rim = np.linalg.norm(pts[:, 1:, :] - pts[:, :1, :], axis=2).mean(axis=1)
    delta0 = np.arcsin(np.clip(rim / r, 0.05, 0.95))
    params = np.zeros((n, 4))
    params[:, 0] = pitch0
    params[:, 1] = yaw0
    params[:, 3] = delta0
    return params


def _wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(x + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def _bounds(config: SolverConfig):
    lower = np.array([-_PITCH_BOUND, -np.inf, -np.inf, config.delta_min])
    upper = np.array([_PITCH_BOUND, np.inf, np.inf, config.delta_max])
    return lower, upper


def _to_fit_result(x: np.ndarray, cost: float, iters: int, converged: bool, config: SolverConfig) -> FitResult:
    delta = float(x[3])
    at_bound = delta <= config.delta_min + 1e-9 or delta >= config.delta_max - 1e-9
    state = EyeballState(
        GazeAngles(float(x[0]), float(x[1])), _wrap_angle(float(x[2])), delta
    )
    return FitResult(state, float(cost), int(iters), bool(converged) and not at_bound)


def fit(observation: EyeballObservation, config: SolverConfig = SolverConfig()) -> FitResult:
    """Fit the 4-parameter eyeball state to one observation.

    The default solver is Levenberg-Marquardt; config.solver='cg' selects
    Polak-Ribiere conjugate gradient instead.  The angular iris radius is
    box-constrained to [delta_min, delta_max] by projection; a fit that
    ends pinned at either bound reports converged=False.
    """
    return fit_many([observation], config)[0]


def fit_many(
    observations: Sequence[EyeballObservation], config: SolverConfig = SolverConfig()
) -> list[FitResult]:
    """Fit a batch of observations; LM runs vectorized across the batch."""
    if not observations:
        return []
    xc, yc, r, pts = _observation_arrays(observations)
    x0 = _initial_batch(xc, yc, r, pts)
    lower, upper = _bounds(config)
    if config.solver == "lm":
        res = levenberg_marquardt(
            lambda ps: _residual_batch(ps, xc, yc, r, pts),
            lambda ps: _jacobian_batch(ps, xc, yc, r),
            x0,
            lower=lower,
            upper=upper,
            max_iters=config.max_iters,
            tol_grad=config.tol_grad,
            tol_step=config.tol_step,
        )
        return [
            _to_fit_result(res.x[i], res.cost[i], res.iterations[i], res.converged[i], config)
            for i in range(len(observations))
        ]
    results = []
    for i in range(len(observations)):
        sl = slice(i, i + 1)
        xci, yci, ri, ptsi = xc[sl], yc[sl], r[sl], pts[sl]
        single = nonlinear_cg(
            lambda v: _residual_batch(v[None, :], xci, yci, ri, ptsi)[0],
            lambda v: _jacobian_batch(v[None, :], xci, yci, ri)[0],
            x0[i],
            lower=lower,
            upper=upper,
            max_iters=config.max_iters,
            tol_grad=config.tol_grad,
            tol_step=config.tol_step,
        )
        results.append(
            _to_fit_result(single.x, single.cost, single.iterations, single.converged, config)
        )
    return results


def calibrate(fits: Sequence[FitResult], truths: Sequence[GazeAngles]) -> PersonCalibration:
    """Mean per-axis offset from fitted optical axes to ground-truth gaze."""
    if len(fits) == 0:
        raise ValueError("calibration requires at least one sample")
    if len(fits) != len(truths):
        raise ValueError(f"got {len(fits)} fits but {len(truths)} truths")
    dp = [t.pitch - f.state.gaze.pitch for f, t in zip(fits, truths)]
    dy = [t.yaw - f.state.gaze.yaw for f, t in zip(fits, truths)]
    return PersonCalibration(sum(dp) / len(dp), sum(dy) / len(dy))


def apply_calibration(gaze: GazeAngles, calibration: PersonCalibration) -> GazeAngles:
    """Shift a fitted gaze by the person's offsets; fails on gimbal overflow."""
    return GazeAngles(gaze.pitch + calibration.pitch_offset, gaze.yaw + calibration.yaw_offset)
