"""Command-line entry point: generate, train, predict, evaluate, report."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .harness import (ConfigError, PipelineConfig, build_dataset, evaluate, format_table,
                      load_dataset, load_models, parse_models, predict_all, train_models)

VERBS = ("generate", "train", "predict", "evaluate", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracrom",
                                     description="Reduced-order fracture models pipeline")
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--seed", type=int, default=None, help="first scenario seed")
    parser.add_argument("--config", type=Path, default=None, help="JSON pipeline config")
    parser.add_argument("--models", default=None, help="comma list from spa,op,mcpic,nfpz,epz")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    return parser


def resolve_config(args) -> PipelineConfig:
    """Explicit --config, else the config saved by generate, else defaults; flags override."""
    saved = args.out / "config.json"
    if args.config:
        config = PipelineConfig.load(args.config)
    elif args.verb != "generate" and saved.exists():
        config = PipelineConfig.load(saved)
    else:
        config = PipelineConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.models is not None:
        overrides["models"] = parse_models(args.models)
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        d = config.to_dict()
        d.update(overrides)
        d.setdefault("jobs", config.jobs)
        config = PipelineConfig.from_dict(d)
    return config


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def run(args) -> int:
    config = resolve_config(args)
    out = args.out
    start = time.perf_counter()
    if args.verb == "generate":
        train, val = build_dataset(config, out)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
        n_failed = sum(tr.failed for _, tr in val)
        _log(f"generated {len(train)} training and {len(val)} validation scenarios "
             f"({n_failed} validation failures)")
    elif args.verb == "train":
        train, _ = load_dataset(config, out)
        train_models(config, train, out)
        _log(f"trained {','.join(config.models)}")
    elif args.verb == "predict":
        _, val = load_dataset(config, out)
        models = load_models(config, out)
        predict_all(config, models, [sc for sc, _ in val], out)
        _log(f"predicted {len(val)} validation scenarios")
    elif args.verb == "evaluate":
        _, val = load_dataset(config, out)
        models = load_models(config, out)
        preds = predict_all(config, models, [sc for sc, _ in val], out)
        report = evaluate(config, val, preds, out)
        print(format_table(report))
    elif args.verb == "report":
        path = out / "report" / "report.json"
        if not path.exists():
            raise FileNotFoundError(f"missing {path}; run evaluate first")
        print(format_table(json.loads(path.read_text())))
    _log(f"{args.verb} finished in {time.perf_counter() - start:.1f} s")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (ConfigError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
