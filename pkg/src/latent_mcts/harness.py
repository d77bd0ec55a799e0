"""Multi-seed experiment runner and ablation sweeps.

An experiment directory holds one ``trace_seed<k>.jsonl`` per seed, a
``tree_seed<k>.json`` final-tree snapshot for tree searches, and a
``manifest.json`` carrying the configuration and its hash.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import make_action_adapter, random_search, regularized_evolution, vanilla_mcts
from .dataset import (Objective, TabularBenchmark, convnet_objective, eggholder_objective,
                      enumerate_objective, load_tabular)
from .search import SearchConfig, lanas_search
from .space import SearchSpace, make_builtin_space
from .trace import SearchTrace

log = logging.getLogger(__name__)

ALGORITHMS = ("lanas", "random", "re", "mcts_sequential", "mcts_global")
CONVNET_TASKS = ("convnet_toy", "convnet_appendix")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str
    algorithm: str
    budget: int
    seeds: list = field(default_factory=lambda: [0])
    params: dict = field(default_factory=dict)
    output_dir: str = "runs/experiment"
    stop_at_optimum: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not (self.task in CONVNET_TASKS or self.task == "eggholder" or self.task.startswith("tabular:")):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.algorithm.startswith("mcts_") and self.task not in CONVNET_TASKS:
            raise ConfigError(f"{self.algorithm} needs a ConvNet task, got {self.task!r}")
        if self.budget < 1:
            raise ConfigError("budget must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(d)


@dataclass
class Task:
    space: SearchSpace
    objective: Objective
    v_star: Optional[float]

    def full_dataset(self) -> tuple[np.ndarray, np.ndarray]:
        """Every (encoding, metric) pair of an enumerable task."""
        if isinstance(self.objective, TabularBenchmark):
            return self.objective.arrays()
        if not self.space.is_finite:
            raise ValueError(f"task on {self.space.name} is not enumerable")
        return enumerate_objective(self.space, self.objective)


def make_task(task: str, params: Optional[dict] = None) -> Task:
    params = params or {}
    if task in CONVNET_TASKS:
        space = make_builtin_space(task)
        return Task(space, convnet_objective(space), 1.0)
    if task == "eggholder":
        obj = eggholder_objective(grid_resolution=params.get("grid_resolution", 2049))
        return Task(obj.space, obj, obj.v_star)
    if task.startswith("tabular:"):
        path = task.split(":", 1)[1]
        space_name = params.get("tabular_space")
        policy = params.get("missing_policy", "floor_zero")
        if space_name is None:
            bench = load_tabular(path, missing_policy=policy, nasbench=True)
        else:
            bench = load_tabular(path, make_builtin_space(space_name), missing_policy=policy)
        return Task(bench.space, bench, bench.v_star)
    raise ConfigError(f"unknown task {task!r}")


_TASK_KEYS = ("grid_resolution", "tabular_space", "missing_policy")


def _algo_params(params: dict) -> dict:
    return {k: v for k, v in params.items() if k not in _TASK_KEYS}


def run_single(cfg: ExperimentConfig, seed: int, task: Optional[Task] = None) -> SearchTrace:
    """Run one seed of ``cfg``."""
    task = task or make_task(cfg.task, cfg.params)
    params = _algo_params(cfg.params)
    target = task.v_star if cfg.stop_at_optimum else None
    if cfg.algorithm == "lanas":
        try:
            sc = SearchConfig(**{**params, "budget": cfg.budget, "seed": seed,
                                 "target": params.get("target", target)})
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return lanas_search(sc, task.objective, task.space)
    if cfg.algorithm == "random":
        return random_search(task.space, task.objective, cfg.budget, seed,
                             dedup=params.get("dedup", True), target=target)
    if cfg.algorithm == "re":
        return regularized_evolution(task.space, task.objective, cfg.budget, seed,
                                     population_size=params.get("population_size", 100),
                                     sample_size=params.get("sample_size", 10), target=target)
    kind = cfg.algorithm.split("_", 1)[1]
    adapter = make_action_adapter(task.space, kind)
    return vanilla_mcts(task.space, task.objective, adapter, cfg.budget, seed,
                        c=params.get("c", 0.1), dedup=params.get("dedup", True), target=target)


def _run_seed(cfg_dict: dict, seed: int) -> tuple[int, str, Optional[str]]:
    trace = run_single(ExperimentConfig.from_dict(cfg_dict), seed)
    tree = json.dumps(trace.final_tree, sort_keys=True) if trace.final_tree is not None else None
    return seed, trace.to_jsonl(), tree


def trace_path(out_dir, seed: int) -> Path:
    return Path(out_dir) / f"trace_seed{seed}.jsonl"


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> Path:
    """Run every seed and write traces plus a manifest to ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    task = make_task(cfg.task, cfg.params)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_seed, [cfg.to_dict()] * len(cfg.seeds), cfg.seeds))
    else:
        results = []
        for seed in cfg.seeds:
            trace = run_single(cfg, seed, task)
            tree = json.dumps(trace.final_tree, sort_keys=True) if trace.final_tree is not None else None
            results.append((seed, trace.to_jsonl(), tree))
    files = []
    for seed, text, tree in results:
        path = trace_path(out, seed)
        path.write_text(text, encoding="utf-8")
        files.append(path.name)
        if tree is not None:
            (out / f"tree_seed{seed}.json").write_text(tree, encoding="utf-8")
        log.info("seed %s: %d evaluations", seed, text.count("\n") - 1)
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "space": task.space.to_dict(),
        "v_star": task.v_star,
        "traces": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8")
    return out


def load_experiment(out_dir) -> tuple[dict, list[SearchTrace]]:
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    traces = [SearchTrace.read(out / name) for name in manifest["traces"]]
    return manifest, traces


# -- ablations ---------------------------------------------------------------

AXES = {"height": "height", "selects": "selects_per_relearn", "c": "c",
        "init": "init_samples", "sampler": "sampler"}


def summarize_traces(traces: Sequence[SearchTrace], v_star: Optional[float], budget: int) -> dict:
    """Median and quartiles of samples-to-optimum and of the best value at budget."""
    row: dict = {"n_seeds": len(traces)}
    if v_star is not None:
        sto = [t.samples_to_reach(v_star) for t in traces]
        row["reached"] = sum(s is not None for s in sto)
        arr = np.array([s if s is not None else math.inf for s in sto], dtype=float)
        row["sto_median"], row["sto_q25"], row["sto_q75"] = (
            float(np.percentile(arr, q, method="lower")) for q in (50, 25, 75))
    best = np.array([t.best_at(budget) for t in traces], dtype=float)
    row["best_median"] = float(np.median(best))
    row["best_q25"], row["best_q75"] = float(np.percentile(best, 25)), float(np.percentile(best, 75))
    return row


def ablation_sweep(base_cfg: ExperimentConfig, axis: str, values: Sequence,
                   out_dir=None) -> list[dict]:
    """Rerun ``base_cfg`` once per value of ``axis`` (same seeds) and summarize."""
    if axis not in AXES:
        raise ConfigError(f"unknown ablation axis {axis!r}; choose from {sorted(AXES)}")
    if not values:
        raise ConfigError("ablation needs at least one value")
    if base_cfg.algorithm != "lanas":
        raise ConfigError("ablation axes apply to the lanas algorithm")
    root = Path(out_dir or base_cfg.output_dir)
    task = make_task(base_cfg.task, base_cfg.params)
    rows = []
    for value in values:
        params = {**base_cfg.params, AXES[axis]: value}
        cfg = replace(base_cfg, params=params, output_dir=str(root / f"{axis}={value}"))
        traces = [run_single(cfg, seed, task) for seed in cfg.seeds]
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for seed, t in zip(cfg.seeds, traces):
            t.write(trace_path(out, seed))
        manifest = {"config": cfg.to_dict(), "config_hash": cfg.config_hash(),
                    "space": task.space.to_dict(), "v_star": task.v_star,
                    "traces": [trace_path(out, s).name for s in cfg.seeds]}
        (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8")
        rows.append({"axis": axis, "value": value,
                     **summarize_traces(traces, task.v_star, cfg.budget)})
    write_rows_csv(rows, root / f"ablation_{axis}.csv")
    return rows


def write_rows_csv(rows: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys: list = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
