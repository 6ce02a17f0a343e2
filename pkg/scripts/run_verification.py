"""Robot-team verification sweep: several seeds and team sizes, one report each.

    python scripts/run_verification.py --robots 3 6 --seeds 1 2 3 --holdout 2000
"""
import argparse
import json
import sys
import time
from pathlib import Path

from scenario_verify.cli import main


def parse():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--robots", type=int, nargs="+", default=[3])
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--n-samples", type=int, default=500)
    p.add_argument("--holdout", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--outdir", default="results/verify")
    return p.parse_args()


if __name__ == "__main__":
    args = parse()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    worst = 0
    print("robots,seed,bound,l,exit,seconds")
    for robots in args.robots:
        for seed in args.seeds:
            stem = outdir / f"r{robots}_s{seed}"
            t0 = time.perf_counter()
            code = main(
                [
                    "verify", "--robots", str(robots), "--seed", str(seed),
                    "--n-samples", str(args.n_samples), "--holdout", str(args.holdout),
                    "--workers", str(args.workers),
                    "--out", f"{stem}.json", "--samples-csv", f"{stem}.csv",
                ]
            )  # fmt: skip
            rep = json.loads(Path(f"{stem}.json").read_text())
            print(f"{robots},{seed},{rep['bound']:.6g},{rep['holdout_violation_fraction']},{code},{time.perf_counter() - t0:.1f}")
            worst = max(worst, code)
    sys.exit(worst)
