"""Command line entry point.

Exit status: 0 on success, 2 on a configuration error, 3 on an I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from .analysis import build_reference_tree, cdf_at_budget, default_checkpoints, kl_dynamics, \
    partition_export, regret_curve
from .dataset import eggholder
from .harness import ExperimentConfig, ablation_sweep, load_experiment, make_task, run_experiment, \
    summarize_traces
from .latree import LaTree
from .space import BUILTIN_SPACES, SearchSpace, make_builtin_space

EXIT_CONFIG, EXIT_IO = 2, 3


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _experiment_dirs(root: Path) -> list[Path]:
    if (root / "manifest.json").exists():
        return [root]
    dirs = sorted(p.parent for p in root.glob("*/manifest.json"))
    if not dirs:
        raise FileNotFoundError(f"no manifest.json in {root} or its subdirectories")
    return dirs


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    out = run_experiment(cfg, workers=args.workers)
    print(json.dumps({"output_dir": str(out), "config_hash": cfg.config_hash()}))
    return 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    values = [json.loads(v) for v in args.values.split(",")]
    rows = ablation_sweep(cfg, args.axis, values, args.out_dir)
    _emit(_csv(rows), None)
    return 0


def cmd_analyze(args) -> int:
    root = Path(args.input)
    dirs = _experiment_dirs(root)
    if args.what == "regret":
        manifest, traces = load_experiment(dirs[0])
        if manifest["v_star"] is None:
            raise ValueError("regret needs a known optimum (v_star)")
        rs = regret_curve(traces, manifest["v_star"])
        rows = [{"n": int(n), "mean": m, "q25": a, "q75": b}
                for n, m, a, b in zip(rs.n, rs.mean, rs.q25, rs.q75)]
    elif args.what == "cdf":
        groups: dict = {}
        budget = args.budget
        for d in dirs:
            manifest, traces = load_experiment(d)
            groups.setdefault(manifest["config"]["algorithm"], []).extend(traces)
            budget = budget or manifest["config"]["budget"]
        rows = []
        for name, cdf in cdf_at_budget(groups, budget).items():
            rows += [{"algorithm": name, "value": float(v), "fraction": float(f)}
                     for v, f in zip(cdf.values, cdf.fractions)]
    elif args.what == "kl":
        manifest, traces = load_experiment(dirs[0])
        cfg = manifest["config"]
        task = make_task(cfg["task"], cfg["params"])
        X, y = task.full_dataset()
        ref = build_reference_tree(X, y, args.height, task.space.metric_range_hint)
        rows = []
        for t in traces:
            n_valid = len(t.valid_records())
            init = t.config.get("init_samples", min(200, n_valid))
            checkpoints = default_checkpoints({"init_samples": init}, n_valid)
            for p in kl_dynamics(t, ref, checkpoints):
                rows.append({"seed": t.seed, "n": p.n, "mean_kl": p.mean_kl, "mean_gap": p.mean_gap})
    else:
        rows = []
        for d in dirs:
            manifest, traces = load_experiment(d)
            rows.append({"run": d.name, **summarize_traces(traces, manifest["v_star"],
                                                           manifest["config"]["budget"])})
    _emit(_csv(rows), args.out)
    return 0


def cmd_viz(args) -> int:
    tree = LaTree.from_dict(json.loads(Path(args.tree).read_text(encoding="utf-8")))
    if args.space_json:
        space = SearchSpace.from_json(Path(args.space_json).read_text(encoding="utf-8"))
    else:
        space = make_builtin_space(args.space)
    if tree.ndim != space.ndim:
        raise ValueError(f"tree has {tree.ndim} dims, space {space.name} has {space.ndim}")
    objective = (lambda e: -eggholder(e)) if space.name == "eggholder2d" else None
    dims = tuple(int(d) for d in args.dims.split(","))
    export = partition_export(tree, space, args.grid, objective, dims=dims)
    _emit(json.dumps(export, sort_keys=True) + "\n", args.out)
    return 0


def cmd_spaces(args) -> int:
    rows = []
    for name in BUILTIN_SPACES:
        sp = make_builtin_space(name)
        size = sp.size()
        rows.append({"name": name, "ndim": sp.ndim, "size": None if math.isinf(size) else int(size)})
    print(json.dumps(rows, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latent-mcts", description="Partition-tree search experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every seed of an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="ablate one search parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, choices=["height", "selects", "c", "init", "sampler"])
    s.add_argument("--values", required=True, help="comma-separated JSON values")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="summarize trace directories as CSV")
    a.add_argument("what", choices=["regret", "cdf", "kl", "ablation"])
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--out")
    a.add_argument("--budget", type=int)
    a.add_argument("--height", type=int, default=4, help="reference tree height for kl")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("viz-partition", help="export leaf assignments of a 2-D grid as JSON")
    v.add_argument("--tree", required=True)
    v.add_argument("--grid", type=int, required=True)
    v.add_argument("--space", default="eggholder2d")
    v.add_argument("--space-json")
    v.add_argument("--dims", default="0,1")
    v.add_argument("--out")
    v.set_defaults(func=cmd_viz)

    sp = sub.add_parser("spaces", help="built-in search spaces")
    sp.add_argument("action", choices=["list"])
    sp.set_defaults(func=cmd_spaces)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
