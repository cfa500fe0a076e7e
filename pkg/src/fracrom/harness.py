"""Dataset generation, training, prediction and scoring for all five models."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .core import LEFT, RIGHT, FailurePath, Scenario, scenario_hash
from .epz import EpzParams, EpzTrainConfig, predict_epz, train_epz
from .mcpic import McpicConfig, McpicModel, predict_failure, train_mcpic
from .ml.net import TrainSchedule
from .nfpz import NfpzConfig, predict_nfpz
from .op import MERGE_DY, OpModel, fit_op, simulate_op
from .oracle import OracleConfig, SimulationTrace, generate_scenario, run_reference
from .spa import predict_spa

MODELS = ("spa", "op", "mcpic", "nfpz", "epz")
TIME_MODELS = ("op", "mcpic", "epz")
CATEGORIES = ("failed_unbranched", "failed_branched", "not_failed")


class ConfigError(ValueError):
    """Invalid pipeline configuration or command-line input."""


# -- configuration -------------------------------------------------------------

@dataclass
class DatasetConfig:
    n_train: int = 150
    n_val: int = 35
    n_cracks: int = 20
    crack_length: float = 0.3

    def __post_init__(self):
        if self.n_train < 1 or self.n_val < 1:
            raise ConfigError("n_train and n_val must be >= 1")
        if self.n_cracks < 1 or not self.crack_length > 0:
            raise ConfigError("need at least one crack of positive length")


@dataclass
class OpConfig:
    degree: int = 3
    lam: float = 1e-3
    merge_dy: float | None = None  # None: pure 1D union of shadows
    skip_idle: bool = False

    def __post_init__(self):
        if self.degree < 0 or self.lam < 0:
            raise ConfigError("op degree and lam must be non-negative")

    @property
    def merge_reach(self) -> float:
        return MERGE_DY if self.merge_dy is None else float(self.merge_dy)


@dataclass
class PipelineConfig:
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    op: OpConfig = field(default_factory=OpConfig)
    mcpic: McpicConfig = field(default_factory=McpicConfig)
    nfpz: NfpzConfig = field(default_factory=NfpzConfig)
    epz: EpzParams = field(default_factory=EpzParams)
    epz_train: EpzTrainConfig = field(default_factory=EpzTrainConfig)
    models: tuple[str, ...] = MODELS
    jobs: int = 1

    def __post_init__(self):
        self.models = parse_models(self.models)
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def train_seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.dataset.n_train))

    @property
    def val_seeds(self) -> list[int]:
        start = self.seed + self.dataset.n_train
        return list(range(start, start + self.dataset.n_val))

    def to_dict(self) -> dict:
        d = _plain(self)
        d.pop("jobs")  # execution detail, not part of the experiment
        return d

    def digest(self) -> str:
        return scenario_hash(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return _build(cls, d)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def parse_models(models) -> tuple[str, ...]:
    if isinstance(models, str):
        models = [m.strip() for m in models.split(",") if m.strip()]
    models = tuple(models)
    bad = [m for m in models if m not in MODELS]
    if bad or not models:
        raise ConfigError(f"unknown models {bad}; choose from {','.join(MODELS)}")
    return tuple(m for m in MODELS if m in models)


def _plain(obj):
    if is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return None
    return obj


_NESTED = {"dataset": DatasetConfig, "oracle": OracleConfig, "op": OpConfig,
           "mcpic": McpicConfig, "nfpz": NfpzConfig, "epz": EpzParams,
           "epz_train": EpzTrainConfig}


def _build(cls, d: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in d.items():
        sub = _NESTED.get(key) if cls is PipelineConfig else None
        if key in ("classifier_schedule", "regressor_schedule") and isinstance(value, dict):
            sub = TrainSchedule
        if sub is not None and isinstance(value, dict):
            value = _build(sub, value)
        elif isinstance(value, list) and key != "models":
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


# -- dataset -------------------------------------------------------------------

def _scenario_file(out: Path, seed: int) -> Path:
    return out / "scenarios" / f"{seed:05d}.json"


def _trace_file(out: Path, seed: int) -> Path:
    return out / "traces" / f"{seed:05d}.jsonl"


def simulate_seed(seed: int, config: PipelineConfig) -> tuple[Scenario, SimulationTrace]:
    ds = config.dataset
    try:
        scenario = generate_scenario(seed, ds.n_cracks, ds.crack_length)
    except RuntimeError as exc:
        raise RuntimeError(f"scenario generation failed for seed {seed}: {exc}") from exc
    return scenario, run_reference(scenario, config.oracle)


def _generate_one(seed: int, config: PipelineConfig, out: Path) -> None:
    scenario, trace = simulate_seed(seed, config)
    scenario.save(_scenario_file(out, seed))
    trace.save(_trace_file(out, seed))


def build_dataset(config: PipelineConfig, out: str | Path):
    """Simulate and persist every training and validation seed; returns (train, val)."""
    out = Path(out)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    seeds = config.train_seeds + config.val_seeds
    Parallel(n_jobs=config.jobs)(delayed(_generate_one)(s, config, out) for s in seeds)
    return load_dataset(config, out)


def load_dataset(config: PipelineConfig, out: str | Path):
    out = Path(out)

    def load(seeds):
        pairs = []
        for s in seeds:
            sf, tf = _scenario_file(out, s), _trace_file(out, s)
            if not (sf.exists() and tf.exists()):
                raise FileNotFoundError(f"missing data for seed {s}; run generate first")
            pairs.append((Scenario.load(sf), SimulationTrace.load(tf)))
        return pairs

    return load(config.train_seeds), load(config.val_seeds)


# -- training ------------------------------------------------------------------

def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def train_models(config: PipelineConfig, train, out: str | Path) -> dict:
    """Fit the trainable models and write one JSON file per requested model."""
    out = Path(out) / "models"
    fitted = {}
    traces = [tr for _, tr in train]
    for name in config.models:
        if name == "spa":
            fitted[name] = {"format": "fracrom.spa/1"}
        elif name == "nfpz":
            fitted[name] = {"format": "fracrom.nfpz/1", **asdict(config.nfpz)}
        elif name == "op":
            model = fit_op(traces, config.op.degree, config.op.lam, config.op.merge_reach,
                           skip_idle=config.op.skip_idle)
            fitted[name] = model.to_dict()
        elif name == "mcpic":
            mc = McpicConfig(**{**asdict(config.mcpic), "seed": config.mcpic.seed + config.seed})
            fitted[name] = train_mcpic(train, mc).to_dict()
        elif name == "epz":
            tc = EpzTrainConfig(**{**asdict(config.epz_train),
                                   "seed": config.epz_train.seed + config.seed})
            params, objective = train_epz(train, config.epz, tc)
            fitted[name] = {**params.to_dict(), "training_objective": objective}
        _write_json(out / f"{name}.json", fitted[name])
    return fitted


def load_models(config: PipelineConfig, out: str | Path) -> dict:
    out = Path(out) / "models"
    models = {}
    for name in config.models:
        path = out / f"{name}.json"
        if not path.exists():
            raise FileNotFoundError(f"missing model {path}; run train first")
        d = json.loads(path.read_text())
        if name == "op":
            models[name] = OpModel.from_dict(d)
        elif name == "mcpic":
            models[name] = McpicModel.from_dict(d)
        elif name == "epz":
            models[name] = EpzParams.from_dict({k: v for k, v in d.items()
                                                if k != "training_objective"})
        elif name == "nfpz":
            models[name] = NfpzConfig(**{k: v for k, v in d.items() if k != "format"})
        else:
            models[name] = None
    return models


# -- prediction ----------------------------------------------------------------

@dataclass
class Prediction:
    model: str
    seed: int
    failure_time: float | None
    path: FailurePath

    def to_dict(self) -> dict:
        return {"model": self.model, "seed": self.seed, "failure_time": self.failure_time,
                "path": list(self.path.crack_ids), "spanning": self.path.spanning}

    @classmethod
    def from_dict(cls, d: dict) -> "Prediction":
        return cls(d["model"], d["seed"], d["failure_time"],
                   FailurePath(tuple(d["path"]), d["spanning"]))


def predict_one(name: str, model, scenario: Scenario) -> tuple[Prediction, str | None]:
    """Prediction plus, for EPZ, the evolved-network event dump."""
    seed = scenario.seed
    if name == "spa":
        return Prediction(name, seed, None, predict_spa(scenario)), None
    if name == "nfpz":
        return Prediction(name, seed, None, predict_nfpz(scenario, model).best), None
    if name == "op":
        res = simulate_op(scenario, model)
        return Prediction(name, seed, res.failure_time, res.failure_path), None
    if name == "mcpic":
        res = predict_failure(scenario, model)
        return Prediction(name, seed, res.failure_time, res.failure_path), None
    if name == "epz":
        res = predict_epz(scenario, model)
        return Prediction(name, seed, res.failure_time, res.failure_path), res.dump_jsonl()
    raise ConfigError(f"unknown model {name}")


def _predict_scenario(models: dict, scenario: Scenario):
    return [predict_one(name, model, scenario) for name, model in models.items()]


def predict_all(config: PipelineConfig, models: dict, scenarios, out: str | Path | None = None):
    """Predictions for every model and scenario: {model: [Prediction, ...]}."""
    results = Parallel(n_jobs=config.jobs)(
        delayed(_predict_scenario)(models, sc) for sc in scenarios)
    by_model = {name: [] for name in models}
    dumps = []
    for sc, row in zip(scenarios, results):
        for pred, dump in row:
            by_model[pred.model].append(pred)
            if dump is not None:
                dumps.append((sc.seed, dump))
    if out is not None:
        pdir = Path(out) / "predictions"
        for name, preds in by_model.items():
            _write_json(pdir / f"{name}.json", [p.to_dict() for p in preds])
        for seed, dump in dumps:
            path = pdir / "epz_networks" / f"{seed:05d}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(dump)
    return by_model


def load_predictions(config: PipelineConfig, out: str | Path) -> dict:
    pdir = Path(out) / "predictions"
    by_model = {}
    for name in config.models:
        path = pdir / f"{name}.json"
        if not path.exists():
            raise FileNotFoundError(f"missing predictions {path}; run predict first")
        by_model[name] = [Prediction.from_dict(d) for d in json.loads(path.read_text())]
    return by_model


# -- scoring -------------------------------------------------------------------

def exact_match(predicted: FailurePath, truth: FailurePath) -> bool:
    return predicted.id_set == truth.id_set


def classify_links(links, members=None) -> str:
    """"branched" if some vertex has three or more distinct link partners."""
    nbrs: dict = {}
    for a, b in links:
        if members is not None and not (a in members and b in members):
            continue
        if a == b:
            continue
        nbrs.setdefault(a, set()).add(b)
        nbrs.setdefault(b, set()).add(a)
    return "branched" if any(len(v) >= 3 for v in nbrs.values()) else "unbranched"


def categorize(trace: SimulationTrace) -> str:
    """Failure category; branching is judged on links among failure-path cracks and edges."""
    if not trace.failed:
        return "not_failed"
    members = set(trace.failure_path.crack_ids) | {LEFT, RIGHT}
    links = [e.pair for e in trace.events if e.t <= trace.failure_time]
    return "failed_" + classify_links(links, members)


def _stats(values) -> dict:
    values = [v for v in values if v is not None]
    if not values:
        return {"n": 0, "mean": None, "std": None}
    arr = np.asarray(values, float)
    return {"n": len(values), "mean": float(arr.mean()), "std": float(arr.std())}


def _fmt(v) -> str:
    return "n/a" if v is None else repr(float(v))


def evaluate(config: PipelineConfig, val, predictions: dict, out: str | Path | None = None) -> dict:
    """Score predictions against the validation traces and emit the report files."""
    rows = []
    matches = {m: {c: 0 for c in CATEGORIES} for m in predictions}
    categories = {c: [] for c in CATEGORIES}
    lookup = {m: {p.seed: p for p in preds} for m, preds in predictions.items()}
    for scenario, trace in val:
        seed = scenario.seed
        cat = categorize(trace)
        categories[cat].append(seed)
        truth = trace.truth_path
        row = {"seed": seed, "category": cat,
               "truth": {"failure_time": trace.failure_time, "path": list(truth.crack_ids)},
               "predictions": {}}
        for m in predictions:
            pred = lookup[m].get(seed)
            if pred is None:
                raise ValueError(f"no {m} prediction for seed {seed}")
            ok = exact_match(pred.path, truth)
            matches[m][cat] += int(ok)
            row["predictions"][m] = {
                "failure_time": pred.failure_time if m in TIME_MODELS else "n/a",
                "path": list(pred.path.crack_ids), "exact_match": ok}
        rows.append(row)

    failed = [(sc, tr) for sc, tr in val if tr.failed]
    parity = []
    for m in TIME_MODELS:
        if m not in predictions:
            continue
        for sc, tr in failed:
            parity.append({"seed": sc.seed, "model": m, "truth_time": tr.failure_time,
                           "predicted_time": lookup[m][sc.seed].failure_time})
    time_stats = {m: _stats(p["predicted_time"] for p in parity if p["model"] == m)
                  for m in TIME_MODELS if m in predictions}
    report = {
        "config_hash": config.digest(),
        "models": list(predictions),
        "n_validation": len(val),
        "category_sizes": {c: len(v) for c, v in categories.items()},
        "categories": categories,
        "matches": matches,
        "oracle_time": _stats(tr.failure_time for _, tr in failed),
        "time_stats": time_stats,
        "scenarios": rows,
        "parity": parity,
    }
    if out is not None:
        write_report(report, val, out)
    return report


def table1_rows(report: dict) -> list[list]:
    models = report["models"]
    rows = [["category", "n"] + models]
    for c in CATEGORIES:
        rows.append([c, report["category_sizes"][c]] + [report["matches"][m][c] for m in models])
    rows.append(["total", report["n_validation"]]
                + [sum(report["matches"][m].values()) for m in models])
    return rows


def write_report(report: dict, val, out: str | Path) -> None:
    rdir = Path(out) / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    _write_json(rdir / "report.json", report)
    with open(rdir / "table1.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(table1_rows(report))
    with open(rdir / "parity.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "model", "truth_time", "predicted_time"])
        for p in report["parity"]:
            w.writerow([p["seed"], p["model"], _fmt(p["truth_time"]), _fmt(p["predicted_time"])])
    for scenario, trace in val:
        with open(rdir / f"damage_{scenario.seed:05d}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "damage"])
            for t, d in trace.accumulated_damage():
                w.writerow([repr(t), repr(d)])


def format_table(report: dict) -> str:
    rows = table1_rows(report)
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(r, widths)) for r in rows]
    lines.append("")
    o = report["oracle_time"]
    lines.append(f"oracle failure time: n={o['n']} mean={_fmt(o['mean'])} std={_fmt(o['std'])}")
    for m, s in report["time_stats"].items():
        lines.append(f"{m} failure time: n={s['n']} mean={_fmt(s['mean'])} std={_fmt(s['std'])}")
    return "\n".join(lines)


def run_pipeline(config: PipelineConfig, out: str | Path) -> dict:
    """generate -> train -> predict -> evaluate."""
    train, val = build_dataset(config, out)
    train_models(config, train, out)
    models = load_models(config, out)
    preds = predict_all(config, models, [sc for sc, _ in val], out)
    return evaluate(config, val, preds, out)
