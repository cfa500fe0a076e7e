"""Sweep the oracle growth constant and report failure counts and times.

Usage: python scripts/calibrate_oracle.py [--values 60,75,90,105] [--seeds 150:185]
"""
import argparse
import dataclasses

import numpy as np
from joblib import Parallel, delayed

from fracrom.oracle import OracleConfig, calibrate_onset, generate_scenario, run_reference
from fracrom.op import first_growth_time


def summarize(c_g: float, seeds: list[int], jobs: int) -> dict:
    config = dataclasses.replace(OracleConfig(), c_g=c_g)
    traces = Parallel(n_jobs=jobs)(
        delayed(run_reference)(generate_scenario(s), config) for s in seeds)
    times = np.array([tr.failure_time for tr in traces if tr.failed])
    onsets = np.array([t for t in map(first_growth_time, traces) if t is not None])
    return {"c_g": c_g, "failed": len(times), "n": len(seeds),
            "mean": float(times.mean()) if len(times) else float("nan"),
            "std": float(times.std()) if len(times) else float("nan"),
            "onset": float(np.median(onsets)) if len(onsets) else float("nan")}


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--values", default="60,75,90,105")
    parser.add_argument("--seeds", default="150:185", help="start:stop seed range")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    lo, hi = (int(v) for v in args.seeds.split(":"))
    seeds = list(range(lo, hi))
    print(f"onset constant for a 1.5 ms first activation: {calibrate_onset(0.0015):.4f}")
    print(f"{'c_g':>6} {'failed':>8} {'mean_s':>10} {'std_s':>10} {'onset_s':>9}")
    for value in (float(v) for v in args.values.split(",")):
        r = summarize(value, seeds, args.jobs)
        print(f"{r['c_g']:6.1f} {r['failed']:>4d}/{r['n']:<3d} {r['mean']:10.5f} "
              f"{r['std']:10.5f} {r['onset']:9.5f}")


if __name__ == "__main__":
    main()
