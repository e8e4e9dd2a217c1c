"""Calibrate the naive mechanism's phase-2 error under the majority attack.

Runs the attack against the exact empirical mechanism and writes error
quantiles to calibration/attack.json. The pinned thresholds in
``adaquery.harness.NAIVE_ATTACK_THRESHOLD`` are the 1% quantiles rounded down
to two significant figures, so a 100-trial check of "at least 90% above" has ample margin. Tests draw from different seeds than this script.

    python scripts/calibrate_attack.py [--trials 1000] [--seed 20240]
"""

import argparse
import json
import math
from pathlib import Path

import numpy as np

from adaquery.harness import KnownDistribution, run_overfitting_attack

SETTINGS = [(512, 1000, 500), (512, 20000, 50)]


def round_down(x: float, digits: int = 2) -> float:
    step = 10.0 ** (math.floor(math.log10(x)) - digits + 1)
    return round(math.floor(x / step) * step, 12)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=20240)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "calibration" / "attack.json"))
    args = parser.parse_args()

    results = []
    for universe, n, k in SETTINGS:
        rng = np.random.default_rng([args.seed, universe, n, k])
        dist = KnownDistribution.uniform(universe)
        errors = np.array([
            run_overfitting_attack("naive-empirical", dist, n, k, rng)[0] for _ in range(args.trials)
        ])
        q = {f"q{p:02d}": float(np.quantile(errors, p / 100)) for p in (1, 5, 10, 50, 90)}
        threshold = round_down(q["q01"])
        results.append({"universe_size": universe, "n": n, "k": k, "trials": args.trials,
                        "mean": float(errors.mean()), **q, "threshold": threshold})
        print(f"|X|={universe} n={n} k={k}: q01={q['q01']:.4f} median={q['q50']:.4f} -> threshold {threshold}")

    Path(args.out).write_text(json.dumps({"seed": args.seed, "settings": results}, indent=2) + "\n")


if __name__ == "__main__":
    main()
