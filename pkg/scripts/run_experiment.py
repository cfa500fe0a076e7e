"""Run generate -> train -> predict -> evaluate and print the match table and time stats.

Usage: python scripts/run_experiment.py [--out out] [--seed 0] [--config cfg.json] [--jobs N]
"""
import argparse
import time
from pathlib import Path

from fracrom.harness import PipelineConfig, format_table, run_pipeline


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    d = config.to_dict()
    d.update(seed=args.seed, jobs=args.jobs)
    config = PipelineConfig.from_dict(d)
    start = time.perf_counter()
    report = run_pipeline(config, args.out)
    print(format_table(report))
    stats, oracle = report["time_stats"], report["oracle_time"]
    ref = stats.get("mcpic", {}).get("std")
    for m, s in stats.items():
        if s["mean"] is not None and oracle["mean"]:
            ratio = f", std ratio to mcpic {s['std'] / ref:.2f}" if ref else ""
            print(f"{m}: mean bias {(s['mean'] - oracle['mean']) / oracle['mean']:+.1%}{ratio}")
    print(f"config {report['config_hash'][:12]}, {time.perf_counter() - start:.0f} s, "
          f"outputs in {args.out}")


if __name__ == "__main__":
    main()
