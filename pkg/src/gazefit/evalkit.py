"""Evaluation metrics and experiment protocols over sample records.

Two metric families: success curves for iris localization (euclidean
error normalized by horizontal eye width, thresholded) and eyelid
registration error (mean point-to-polyline distance normalized by
interocular distance).  Two protocols: per-person personalized
calibration sweeps over k, and cross-population train/test splits.

Gaze targets are always the visual-axis labels.  The model-fit method
outputs optical-axis estimates, so its personalized variant absorbs the
optical-to-visual offset through calibration; uncalibrated runs (k=0)
score the raw optical estimate.  Reports are plain data and serialize
to CSV with a fixed column order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .eyeball import SolverConfig, fit_many
from .features import build_features
from .svr import SvrParams, predict_angles, select_calibration, train_gaze_regressor
from .synth import SampleRecord, to_observation

__all__ = [
    "METHODS",
    "DEFAULT_THRESHOLDS",
    "SuccessCurve",
    "ExperimentReport",
    "angular_errors_deg",
    "iris_localization_curve",
    "eyelid_registration_error",
    "run_personalized",
    "run_cross_population",
    "write_reports_csv",
    "write_curve_csv",
]

METHODS = ("model-fit", "svr-landmarks")

DEFAULT_THRESHOLDS = np.linspace(0.0, 0.20, 41)


@dataclass(frozen=True)
class SuccessCurve:
    """Success rate at each threshold; thresholds strictly increasing."""

    thresholds: np.ndarray
    rates: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.thresholds, dtype=np.float64)
        r = np.asarray(self.rates, dtype=np.float64)
        if t.ndim != 1 or t.shape != r.shape:
            raise ValueError("thresholds and rates must be aligned 1D arrays")
        if t.size >= 2 and not np.all(np.diff(t) > 0):
            raise ValueError("thresholds must be strictly increasing")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("rates must lie in [0, 1]")
        if r.size >= 2 and np.any(np.diff(r) < 0):
            raise ValueError("rates must be non-decreasing in threshold")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "rates", r)


@dataclass(frozen=True)
class ExperimentReport:
    """Mean angular error in degrees, per person and pooled."""

    method: str
    k: int
    person_errors_deg: dict[int, float]
    person_counts: dict[int, int]
    pooled_error_deg: float
    n_eval: int

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.pooled_error_deg < 0 or any(e < 0 for e in self.person_errors_deg.values()):
            raise ValueError("angular errors must be non-negative")


def iris_localization_curve(
    predicted: np.ndarray,
    truth: np.ndarray,
    eye_widths: np.ndarray,
    thresholds: np.ndarray | None = None,
) -> SuccessCurve:
    """Fraction of samples with ||pred - true|| / eye_width <= t, per t."""
    predicted = np.atleast_2d(np.asarray(predicted, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    widths = np.atleast_1d(np.asarray(eye_widths, dtype=np.float64))
    if predicted.shape != truth.shape or predicted.shape[0] != widths.shape[0]:
        raise ValueError("predicted, truth, and eye_widths must be aligned")
    if np.any(widths <= 0):
        raise ValueError("eye widths must be positive")
    t = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    normalized = np.linalg.norm(predicted - truth, axis=1) / widths
    rates = np.array([np.mean(normalized <= ti) for ti in t])
    return SuccessCurve(thresholds=t, rates=rates)


def eyelid_registration_error(
    predicted: Sequence, polyline: Sequence, interocular: float
) -> float:
    """Mean distance from predicted points to a polyline, normalized.

    The polyline linearly interpolates its points; each predicted point
    is scored against its closest segment.  Zero-length segments reduce
    to point distances, so a fully degenerate polyline still works.
    """
    pts = np.array([(p.u, p.v) if hasattr(p, "u") else tuple(p) for p in predicted])
    poly = np.array([(p.u, p.v) if hasattr(p, "u") else tuple(p) for p in polyline])
    if poly.shape[0] < 2:
        raise ValueError("polyline needs at least 2 points")
    if not interocular > 0:
        raise ValueError(f"interocular distance must be positive, got {interocular}")
    a = poly[:-1]
    d = poly[1:] - a
    seg_len2 = np.sum(d * d, axis=1)
    rel = pts[:, None, :] - a[None, :, :]
    t = np.sum(rel * d[None, :, :], axis=2)
    t = np.divide(t, seg_len2[None, :], out=np.zeros_like(t), where=seg_len2 > 0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.min(np.linalg.norm(pts[:, None, :] - closest, axis=2), axis=1)
    return float(dist.mean() / interocular)


def angular_errors_deg(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Angle in degrees between the gaze vectors of (n, 2) angle pairs."""
    cp, ct = np.cos(pred[:, 0]), np.cos(truth[:, 0])
    dot = (
        cp * np.sin(pred[:, 1]) * ct * np.sin(truth[:, 1])
        + np.sin(pred[:, 0]) * np.sin(truth[:, 0])
        + cp * np.cos(pred[:, 1]) * ct * np.cos(truth[:, 1])
    )
    return np.degrees(np.arccos(np.clip(dot, -1.0, 1.0)))


def _group_by_person(records: Sequence[SampleRecord]) -> dict[int, list[SampleRecord]]:
    groups: dict[int, list[SampleRecord]] = {}
    for rec in records:
        groups.setdefault(rec.person_id, []).append(rec)
    return dict(sorted(groups.items()))


def _fit_angles(records: Sequence[SampleRecord], solver: SolverConfig) -> np.ndarray:
    """Optical-axis estimates for each record, (n, 2) radians."""
    results = fit_many([to_observation(r) for r in records], solver)
    return np.array([(f.state.gaze.pitch, f.state.gaze.yaw) for f in results])


def _features(records: Sequence[SampleRecord], config: str) -> np.ndarray:
    return np.array([build_features(r.landmarks, config) for r in records])


def _visual_truth(records: Sequence[SampleRecord]) -> np.ndarray:
    return np.array([(r.gaze_visual.pitch, r.gaze_visual.yaw) for r in records])


def run_personalized(
    records: Sequence[SampleRecord],
    method: str,
    k_values: Sequence[int],
    *,
    solver: SolverConfig = SolverConfig(),
    svr_params: SvrParams = SvrParams(),
    feature_config: str = "full",
) -> list[ExperimentReport]:
    """Calibration-size sweep: one report per k, per-person splits.

    For each person, calibration samples are chosen by farthest-point
    selection on visual-axis truth, the method is calibrated (model-fit:
    constant angle offset) or trained (svr-landmarks) on them, and the
    remaining samples are scored.  k=0 is the uncalibrated model fit.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    groups = _group_by_person(records)
    if not groups:
        raise ValueError("dataset is empty")
    max_k = max(k_values, default=0)
    for pid, recs in groups.items():
        if len(recs) <= max_k:
            raise ValueError(f"person {pid} has {len(recs)} samples; need > {max_k}")
    if method == "svr-landmarks" and min(k_values, default=2) < 2:
        raise ValueError("svr-landmarks needs k >= 2 calibration samples")

    per_person: dict[int, dict] = {}
    for pid, recs in groups.items():
        truth = _visual_truth(recs)
        state = {"truth": truth}
        if method == "model-fit":
            state["fit"] = _fit_angles(recs, solver)
        else:
            state["features"] = _features(recs, feature_config)
        per_person[pid] = state

    reports = []
    for k in k_values:
        person_errors: dict[int, float] = {}
        person_counts: dict[int, int] = {}
        err_sum = 0.0
        n_total = 0
        for pid, state in per_person.items():
            truth = state["truth"]
            n = truth.shape[0]
            eval_mask = np.ones(n, dtype=bool)
            if k > 0:
                chosen = select_calibration(truth, k)
                eval_mask[chosen] = False
            if method == "model-fit":
                fit = state["fit"]
                offset = (truth[~eval_mask] - fit[~eval_mask]).mean(axis=0) if k > 0 else 0.0
                pred = fit[eval_mask] + offset
            else:
                regressor = train_gaze_regressor(
                    state["features"][~eval_mask], truth[~eval_mask], svr_params, feature_config
                )
                pred = predict_angles(regressor, state["features"][eval_mask])
            errors = angular_errors_deg(pred, truth[eval_mask])
            person_errors[pid] = float(errors.mean())
            person_counts[pid] = int(errors.size)
            err_sum += float(errors.sum())
            n_total += errors.size
        reports.append(
            ExperimentReport(
                method=method,
                k=k,
                person_errors_deg=person_errors,
                person_counts=person_counts,
                pooled_error_deg=err_sum / n_total,
                n_eval=n_total,
            )
        )
    return reports


def run_cross_population(
    train_records: Sequence[SampleRecord],
    test_records: Sequence[SampleRecord],
    method: str,
    *,
    solver: SolverConfig = SolverConfig(),
    svr_params: SvrParams = SvrParams(),
    feature_config: str = "full",
) -> ExperimentReport:
    """Train on one population, score pooled error on a disjoint one.

    model-fit needs no training, so the train set may be empty for it;
    svr-landmarks trains a single regressor on every training record.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if not test_records:
        raise ValueError("test set is empty")
    train_ids = {r.person_id for r in train_records}
    test_ids = {r.person_id for r in test_records}
    overlap = train_ids & test_ids
    if overlap:
        raise ValueError(f"train and test persons overlap: {sorted(overlap)}")

    groups = _group_by_person(test_records)
    if method == "model-fit":
        predict = lambda recs: _fit_angles(recs, solver)
    else:
        if len(train_records) < 2:
            raise ValueError("svr-landmarks needs at least 2 training records")
        regressor = train_gaze_regressor(
            _features(train_records, feature_config),
            _visual_truth(train_records),
            svr_params,
            feature_config,
        )
        predict = lambda recs: predict_angles(regressor, _features(recs, feature_config))

    person_errors: dict[int, float] = {}
    person_counts: dict[int, int] = {}
    err_sum = 0.0
    n_total = 0
    for pid, recs in groups.items():
        errors = angular_errors_deg(predict(recs), _visual_truth(recs))
        person_errors[pid] = float(errors.mean())
        person_counts[pid] = int(errors.size)
        err_sum += float(errors.sum())
        n_total += errors.size
    return ExperimentReport(
        method=method,
        k=0,
        person_errors_deg=person_errors,
        person_counts=person_counts,
        pooled_error_deg=err_sum / n_total,
        n_eval=n_total,
    )


def write_reports_csv(reports: Iterable[ExperimentReport], stream: TextIO) -> None:
    """Per-person rows then an 'all' row per report; fixed column order."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["method", "person_id", "k", "n_eval", "mean_error_deg"])
    for rep in reports:
        for pid in sorted(rep.person_errors_deg):
            writer.writerow(
                [
                    rep.method,
                    pid,
                    rep.k,
                    rep.person_counts[pid],
                    format(rep.person_errors_deg[pid], ".9g"),
                ]
            )
        writer.writerow(
            [rep.method, "all", rep.k, rep.n_eval, format(rep.pooled_error_deg, ".9g")]
        )


def write_curve_csv(curve: SuccessCurve, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["threshold", "success_rate"])
    for t, r in zip(curve.thresholds, curve.rates):
        writer.writerow([format(float(t), ".9g"), format(float(r), ".9g")])
