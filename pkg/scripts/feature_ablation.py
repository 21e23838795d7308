"""Compare landmark feature subsets for the personalized gaze regressor.

Runs the k-calibration protocol once per feature configuration on the
same dataset, so rows differ only in which landmarks feed the SVR.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gazefit import FEATURE_CONFIGS, NoiseSpec, generate_dataset, run_personalized


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--people", type=int, default=20)
    parser.add_argument("--samples", type=int, default=500, help="samples per person")
    parser.add_argument("--difficulty", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--k", type=int, default=100, help="calibration samples per person")
    parser.add_argument(
        "--features", nargs="+", default=list(FEATURE_CONFIGS), choices=list(FEATURE_CONFIGS)
    )
    args = parser.parse_args()

    records = generate_dataset(
        args.people, args.samples, noise=NoiseSpec(difficulty=args.difficulty), seed=args.seed
    )
    print(f"{'features':<12} {'dim':>4} {'error_deg':>10}")
    for config in args.features:
        report = run_personalized(records, "svr-landmarks", [args.k], feature_config=config)[0]
        print(f"{config:<12} {FEATURE_CONFIGS[config]:>4} {report.pooled_error_deg:>10.3f}")


if __name__ == "__main__":
    main()
