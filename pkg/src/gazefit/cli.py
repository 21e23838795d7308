"""Command-line front end.

Subcommands:
  synth    generate a synthetic landmark dataset
  fit      fit the eyeball model to every record, append fit results
  train    train the two-axis gaze regressor on a dataset
  predict  apply a trained regressor to a dataset
  eval     run a calibration sweep or cross-population experiment
  curves   emit an iris localization success curve

Every flag lives in one declarative table per subcommand; the table
drives argparse registration, config-file validation, and --help text,
so the three can never drift apart.  Values resolve with precedence
command line > config file (--config, flat key=value lines) > built-in
default.  Identical flags and seed produce byte-identical output files.

Exit codes: 0 success, 1 runtime or data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import evalkit, svr, synth
from .eyeball import SolverConfig, fit_many, project_iris_center
from .features import FEATURE_CONFIGS, build_features
from .geometry import GazeAngles

__all__ = ["main", "run"]


class _UsageError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _parse_gamma(text: str) -> float | None:
    if text.strip().lower() == "auto":
        return None
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"gamma must be positive, got {text!r}")
    return value


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


@dataclass(frozen=True)
class Flag:
    """One command-line option: registration, parsing, and help in one row."""

    name: str
    type: Callable
    default: object
    help: str
    required: bool = False
    choices: tuple | None = None

    @property
    def dest(self) -> str:
        return self.name.lstrip("-").replace("-", "_")


_COMMON = [
    Flag("--config", str, None, "flat key=value config file; flags override it"),
]

_FLAGS: dict[str, list[Flag]] = {
    "synth": [
        Flag("--out", str, None, "output dataset path", required=True),
        Flag("--seed", int, None, "master seed; all randomness derives from it", required=True),
        Flag("--people", int, 5, "number of identities"),
        Flag("--per-person", int, 100, "records per identity"),
        Flag("--difficulty", float, 0.0, "noise difficulty in [0, 1]"),
        Flag("--jitter-sigma", float, 1.0, "per-landmark jitter at difficulty 1, px"),
        Flag("--translation-range", float, 10.0, "global translation at difficulty 1, px"),
        Flag("--rotation-range", float, 0.1, "global rotation at difficulty 1, rad"),
        Flag("--scale-range", float, 0.1, "global scale deviation at difficulty 1"),
        Flag("--gaze-range-deg", float, 35.0, "half-width of the pitch/yaw box, degrees"),
    ],
    "fit": [
        Flag("--in", str, None, "input dataset path", required=True),
        Flag("--out", str, None, "output path for fit-augmented records", required=True),
        Flag("--solver", str, "lm", "optimizer", choices=("lm", "cg")),
        Flag("--max-iters", int, 200, "solver iteration cap"),
        Flag("--tol-grad", float, 1e-10, "gradient-norm stopping tolerance"),
        Flag("--tol-step", float, 1e-12, "step-norm stopping tolerance"),
        Flag("--delta-min", float, 0.01, "lower iris-radius bound, rad"),
        Flag("--delta-max", float, 1.2, "upper iris-radius bound, rad"),
    ],
    "train": [
        Flag("--in", str, None, "training dataset path", required=True),
        Flag("--out", str, None, "output model path", required=True),
        Flag("--features", str, "full", "feature ablation",
             choices=tuple(FEATURE_CONFIGS)),
        Flag("--kernel", str, "rbf", "kernel", choices=("rbf", "linear")),
        Flag("--C", float, 10.0, "regularization"),
        Flag("--epsilon", float, 0.01, "tube width, rad"),
        Flag("--gamma", _parse_gamma, None, "rbf width; 'auto' = 1/dim"),
        Flag("--tol", float, 1e-3, "SMO stopping tolerance"),
        Flag("--smo-max-iters", int, 100_000, "SMO iteration cap"),
        Flag("--standardize", _parse_bool, True, "standardize features before the kernel"),
        Flag("--tune", _parse_bool, False, "grid-search (C, epsilon, gamma) first"),
    ],
    "predict": [
        Flag("--in", str, None, "input dataset path", required=True),
        Flag("--model", str, None, "trained model path", required=True),
        Flag("--out", str, None, "output path for predictions", required=True),
        Flag("--features", str, None,
             "expected feature ablation; must match the model file"),
    ],
    "eval": [
        Flag("--mode", str, "personalized", "experiment protocol",
             choices=("personalized", "cross")),
        Flag("--in", str, None, "dataset path (personalized mode)"),
        Flag("--train-in", str, None, "training dataset path (cross mode)"),
        Flag("--test-in", str, None, "test dataset path (cross mode)"),
        Flag("--method", str, "model-fit", "gaze method", choices=evalkit.METHODS),
        Flag("--k", _parse_int_list, (10, 20, 50, 100), "calibration sizes, comma-separated"),
        Flag("--out", str, None, "output CSV path", required=True),
        Flag("--solver", str, "lm", "optimizer for model-fit", choices=("lm", "cg")),
        Flag("--features", str, "full", "feature ablation for svr-landmarks",
             choices=tuple(FEATURE_CONFIGS)),
        Flag("--C", float, 10.0, "SVR regularization"),
        Flag("--epsilon", float, 0.01, "SVR tube width, rad"),
        Flag("--gamma", _parse_gamma, None, "SVR rbf width; 'auto' = 1/dim"),
    ],
    "curves": [
        Flag("--in", str, None, "input dataset path", required=True),
        Flag("--out", str, None, "output CSV path", required=True),
        Flag("--source", str, "fit", "predicted center: model fit or raw landmark",
             choices=("fit", "observed")),
        Flag("--solver", str, "lm", "optimizer for --source fit", choices=("lm", "cg")),
    ],
}


@dataclass(frozen=True)
class RunConfig:
    """A subcommand plus its fully resolved option values."""

    command: str
    options: dict

    def __getitem__(self, key: str):
        return self.options[key]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazefit", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, flags in _FLAGS.items():
        sub = subparsers.add_parser(command)
        for flag in flags + _COMMON:
            kwargs: dict = {"type": flag.type, "default": None, "help": flag.help}
            if flag.choices:
                kwargs["choices"] = flag.choices
            sub.add_argument(flag.name, dest=flag.dest, **kwargs)
    return parser


def _read_config_file(path: str, flags: list[Flag]) -> dict:
    by_dest = {f.dest: f for f in flags}
    values: dict = {}
    if not os.path.isfile(path):
        raise _UsageError(f"config file does not exist: {path}")
    with open(path) as stream:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise _UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, text = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in by_dest:
                raise _UsageError(f"{path}:{lineno}: unknown key {key!r}")
            flag = by_dest[key]
            try:
                value = flag.type(text.strip())
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise _UsageError(f"{path}:{lineno}: {exc}")
            if flag.choices and value not in flag.choices:
                raise _UsageError(
                    f"{path}:{lineno}: {key} must be one of {flag.choices}, got {value!r}"
                )
            values[key] = value
    return values


def _resolve(args: argparse.Namespace) -> RunConfig:
    flags = _FLAGS[args.command]
    from_file = _read_config_file(args.config, flags) if args.config else {}
    options: dict = {}
    for flag in flags:
        value = getattr(args, flag.dest)
        if value is None:
            value = from_file.get(flag.dest, flag.default)
        if value is None and flag.required:
            raise _UsageError(f"{args.command}: {flag.name} is required")
        options[flag.dest] = value
    return RunConfig(command=args.command, options=options)


def _check_input(path: str) -> None:
    if not os.path.isfile(path):
        raise _UsageError(f"input file does not exist: {path}")
    if not os.access(path, os.R_OK):
        raise _UsageError(f"input file is not readable: {path}")


def _check_output(path: str) -> None:
    parent = os.path.dirname(path) or "."
    if not os.path.isdir(parent):
        raise _UsageError(f"output directory does not exist: {parent}")
    if not os.access(parent, os.W_OK):
        raise _UsageError(f"output path is not writable: {path}")
    if os.path.exists(path) and not os.access(path, os.W_OK):
        raise _UsageError(f"output file is not writable: {path}")


def _load_records(path: str) -> list[synth.SampleRecord]:
    with open(path) as stream:
        return synth.read_dataset(stream)


def cmd_synth(config: RunConfig) -> int:
    _check_output(config["out"])
    if config["people"] < 1 or config["per_person"] < 1:
        raise _UsageError("--people and --per-person must be at least 1")
    noise = synth.NoiseSpec(
        difficulty=config["difficulty"],
        jitter_sigma=config["jitter_sigma"],
        translation_range=config["translation_range"],
        rotation_range=config["rotation_range"],
        scale_range=config["scale_range"],
    )
    records = synth.generate_dataset(
        config["people"],
        config["per_person"],
        gaze_range=math.radians(config["gaze_range_deg"]),
        noise=noise,
        seed=config["seed"],
    )
    with open(config["out"], "w") as stream:
        synth.write_dataset(records, stream)
    print(f"wrote {len(records)} records to {config['out']} (seed {config['seed']})")
    return 0


def cmd_fit(config: RunConfig) -> int:
    _check_input(config["in"])
    _check_output(config["out"])
    solver = SolverConfig(
        solver=config["solver"],
        max_iters=config["max_iters"],
        tol_grad=config["tol_grad"],
        tol_step=config["tol_step"],
        delta_min=config["delta_min"],
        delta_max=config["delta_max"],
    )
    objs: list[dict] = []
    records: list[synth.SampleRecord] = []
    skipped = 0
    with open(config["in"]) as stream:
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                record = synth.obj_to_record(obj)
            except (ValueError, KeyError, TypeError) as exc:
                print(f"warning: skipping record at line {lineno}: {exc}", file=sys.stderr)
                skipped += 1
                continue
            objs.append(obj)
            records.append(record)
    if not records:
        print(f"error: no usable records in {config['in']} ({skipped} skipped)", file=sys.stderr)
        return 1

    results = fit_many([synth.to_observation(r) for r in records], solver)
    with open(config["out"], "w") as stream:
        for obj, result in zip(objs, results):
            state = result.state
            obj["fit"] = {
                "pitch": synth.sig9(state.gaze.pitch),
                "yaw": synth.sig9(state.gaze.yaw),
                "roll": synth.sig9(state.roll),
                "iris_radius": synth.sig9(state.iris_radius),
                "residual": synth.sig9(result.residual),
                "iterations": result.iterations,
                "converged": result.converged,
            }
            stream.write(json.dumps(obj, separators=(",", ":")) + "\n")
    fitted = np.array([(r.state.gaze.pitch, r.state.gaze.yaw) for r in results])
    truth = np.array([(r.gaze_optical.pitch, r.gaze_optical.yaw) for r in records])
    mean_err = float(evalkit.angular_errors_deg(fitted, truth).mean())
    print(
        f"fitted {len(records)} records ({skipped} skipped); "
        f"mean angular error vs optical truth {mean_err:.6g} deg"
    )
    return 0


def cmd_train(config: RunConfig) -> int:
    _check_input(config["in"])
    _check_output(config["out"])
    records = _load_records(config["in"])
    if len(records) < 2:
        raise ValueError("training needs at least 2 records")
    feature_config = config["features"]
    features = np.array([build_features(r.landmarks, feature_config) for r in records])
    targets = np.array([(r.gaze_visual.pitch, r.gaze_visual.yaw) for r in records])
    params = svr.SvrParams(
        kernel=config["kernel"],
        gamma=config["gamma"],
        C=config["C"],
        epsilon=config["epsilon"],
        tol=config["tol"],
        max_iters=config["smo_max_iters"],
        standardize=config["standardize"],
    )
    if config["tune"]:
        c, eps, gamma = svr.tune(features, targets[:, 0], params=params)
        params = svr.SvrParams(
            kernel=params.kernel, gamma=gamma, C=c, epsilon=eps,
            tol=params.tol, max_iters=params.max_iters, standardize=params.standardize,
        )
        print(f"tuned hyperparameters: C={c!r} epsilon={eps!r} gamma={gamma!r}")
    regressor = svr.train_gaze_regressor(features, targets, params, feature_config)
    with open(config["out"], "w") as stream:
        svr.save_regressor(regressor, stream)
    print(
        f"trained {feature_config} regressor on {len(records)} records -> {config['out']}"
    )
    return 0


def cmd_predict(config: RunConfig) -> int:
    _check_input(config["in"])
    _check_input(config["model"])
    _check_output(config["out"])
    with open(config["model"]) as stream:
        regressor = svr.load_regressor(stream)
    if config["features"] and config["features"] != regressor.feature_config:
        print(
            f"error: model was trained with feature config "
            f"{regressor.feature_config!r}, not {config['features']!r}",
            file=sys.stderr,
        )
        return 1
    records = _load_records(config["in"])
    if not records:
        raise ValueError(f"no records in {config['in']}")
    features = np.array(
        [build_features(r.landmarks, regressor.feature_config) for r in records]
    )
    predicted = svr.predict_angles(regressor, features)
    truth = np.array([(r.gaze_visual.pitch, r.gaze_visual.yaw) for r in records])
    with open(config["out"], "w") as stream:
        for record, (pitch, yaw) in zip(records, predicted):
            obj = synth.record_to_obj(record)
            obj["gaze_pred"] = [synth.sig9(pitch), synth.sig9(yaw)]
            stream.write(json.dumps(obj, separators=(",", ":")) + "\n")
    mean_err = float(evalkit.angular_errors_deg(predicted, truth).mean())
    print(
        f"predicted {len(records)} records -> {config['out']}; "
        f"mean angular error vs visual truth {mean_err:.6g} deg"
    )
    return 0


def cmd_eval(config: RunConfig) -> int:
    _check_output(config["out"])
    solver = SolverConfig(solver=config["solver"])
    params = svr.SvrParams(
        gamma=config["gamma"], C=config["C"], epsilon=config["epsilon"]
    )
    if config["mode"] == "personalized":
        if not config["in"]:
            raise _UsageError("eval --mode personalized requires --in")
        _check_input(config["in"])
        records = _load_records(config["in"])
        reports = evalkit.run_personalized(
            records,
            config["method"],
            list(config["k"]),
            solver=solver,
            svr_params=params,
            feature_config=config["features"],
        )
    else:
        if not config["train_in"] or not config["test_in"]:
            raise _UsageError("eval --mode cross requires --train-in and --test-in")
        _check_input(config["train_in"])
        _check_input(config["test_in"])
        reports = [
            evalkit.run_cross_population(
                _load_records(config["train_in"]),
                _load_records(config["test_in"]),
                config["method"],
                solver=solver,
                svr_params=params,
                feature_config=config["features"],
            )
        ]
    with open(config["out"], "w") as stream:
        evalkit.write_reports_csv(reports, stream)
    rows = sum(len(r.person_errors_deg) + 1 for r in reports)
    print(f"wrote {rows} report rows to {config['out']}")
    return 0


def cmd_curves(config: RunConfig) -> int:
    _check_input(config["in"])
    _check_output(config["out"])
    records = _load_records(config["in"])
    if not records:
        raise ValueError(f"no records in {config['in']}")
    if config["source"] == "fit":
        solver = SolverConfig(solver=config["solver"])
        results = fit_many([synth.to_observation(r) for r in records], solver)
        predicted = []
        for record, result in zip(records, results):
            lm = record.landmarks
            center = project_iris_center(result.state, lm.eyeball_center, lm.radius)
            predicted.append((center.u, center.v))
    else:
        predicted = [(r.landmarks.iris_center.u, r.landmarks.iris_center.v) for r in records]
    truth = [(r.truth_iris_center.u, r.truth_iris_center.v) for r in records]
    widths = [r.landmarks.eye_width for r in records]
    curve = evalkit.iris_localization_curve(
        np.array(predicted), np.array(truth), np.array(widths)
    )
    with open(config["out"], "w") as stream:
        evalkit.write_curve_csv(curve, stream)
    print(
        f"wrote success curve over {len(records)} records to {config['out']}; "
        f"rate at final threshold {curve.rates[-1]:.6g}"
    )
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "curves": cmd_curves,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _resolve(args)
        return _COMMANDS[config.command](config)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    raise SystemExit(main(sys.argv[1:]))
