"""Sweep calibration-set size k for both personalization methods.

Generates a synthetic population per seed, runs the per-person
calibration protocol, and prints pooled angular error averaged over
seeds.  model-fit includes k=0 (uncalibrated); svr-landmarks starts at
the smallest k that can train.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from gazefit import NoiseSpec, generate_dataset, run_personalized


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--people", type=int, default=20)
    parser.add_argument("--samples", type=int, default=1000, help="samples per person")
    parser.add_argument("--difficulty", type=float, default=1.0)
    parser.add_argument("--seeds", type=int, default=10, help="number of dataset seeds")
    parser.add_argument("--k", type=int, nargs="+", default=[10, 20, 50, 100])
    parser.add_argument("--out", type=Path, default=None, help="optional CSV of the averaged table")
    args = parser.parse_args()

    fit_ks = sorted(set(args.k) | {0})
    svr_ks = [k for k in sorted(set(args.k)) if k >= 2]
    errors = {("model-fit", k): [] for k in fit_ks}
    errors.update({("svr-landmarks", k): [] for k in svr_ks})

    for seed in range(args.seeds):
        records = generate_dataset(
            args.people, args.samples, noise=NoiseSpec(difficulty=args.difficulty), seed=seed
        )
        for report in run_personalized(records, "model-fit", fit_ks):
            errors[("model-fit", report.k)].append(report.pooled_error_deg)
        for report in run_personalized(records, "svr-landmarks", svr_ks):
            errors[("svr-landmarks", report.k)].append(report.pooled_error_deg)
        print(f"seed {seed} done", file=sys.stderr)

    rows = [
        (method, k, float(np.mean(vals)), float(np.std(vals)))
        for (method, k), vals in sorted(errors.items())
    ]
    print(f"{'method':<15} {'k':>4} {'error_deg':>10} {'std':>8}")
    for method, k, mean, std in rows:
        print(f"{method:<15} {k:>4} {mean:>10.3f} {std:>8.3f}")

    if args.out is not None:
        with args.out.open("w") as fh:
            fh.write("method,k,error_deg,std\n")
            for method, k, mean, std in rows:
                fh.write(f"{method},{k},{mean!r},{std!r}\n")
        print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
