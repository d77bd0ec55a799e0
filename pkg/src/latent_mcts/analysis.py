"""Trace analysis: regret curves, CDFs of the final best value, the
reference-tree KL diagnostic and 2-D partition export.

Everything here is recomputed from traces (and, for KL, a reference tree
built from a complete dataset); no search state is needed.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .latree import LaTree
from .search import SearchConfig
from .space import SearchSpace
from .trace import SearchTrace

N_BINS = 30
SMOOTHING = 1e-6


@dataclass
class RegretSeries:
    mean: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    per_seed: np.ndarray

    @property
    def n(self) -> np.ndarray:
        """Unique-valid-sample index (1-based) of each entry."""
        return np.arange(1, len(self.mean) + 1)


def regret_curve(traces: Sequence[SearchTrace], v_star: float) -> RegretSeries:
    """``v_star - best_so_far`` per unique valid sample, aggregated over seeds.

    Curves are truncated to the shortest trace.
    """
    curves = [t.best_by_unique() for t in traces]
    if not curves or min(len(c) for c in curves) == 0:
        raise ValueError("regret_curve needs non-empty traces")
    n = min(len(c) for c in curves)
    R = np.maximum(v_star - np.array([c[:n] for c in curves]), 0.0)
    return RegretSeries(R.mean(axis=0), np.percentile(R, 25, axis=0), np.percentile(R, 75, axis=0), R)


@dataclass
class EmpiricalCDF:
    values: np.ndarray
    fractions: np.ndarray
    short_seeds: list

    def median(self) -> float:
        return float(np.median(self.values))


def cdf_at_budget(traces_by_algorithm: Mapping[str, Sequence[SearchTrace]],
                  budget: int) -> dict[str, EmpiricalCDF]:
    """Empirical CDF of the best value after ``budget`` unique valid samples.

    Traces that never reach the budget are listed in ``short_seeds`` and left
    out of the CDF, with a warning.
    """
    out = {}
    for name, traces in traces_by_algorithm.items():
        vals, short = [], []
        for t in traces:
            if t.unique_valid < budget:
                short.append(t.seed)
                continue
            vals.append(t.best_at(budget))
        if short:
            warnings.warn(f"{name}: {len(short)} trace(s) shorter than budget {budget}: seeds {short}")
        v = np.sort(np.array(vals, dtype=float))
        out[name] = EmpiricalCDF(v, np.arange(1, len(v) + 1) / max(len(v), 1), short)
    return out


# -- reference tree and KL dynamics -----------------------------------------

@dataclass
class LeafHistogram:
    counts: np.ndarray
    probs: np.ndarray
    mean: float

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def metric_bins(metric_range: Optional[tuple] = None, n_bins: int = N_BINS) -> np.ndarray:
    lo, hi = metric_range if metric_range is not None else (0.0, 1.0)
    return np.linspace(lo, hi, n_bins + 1)


def leaf_histogram(values, edges: np.ndarray, eps: float = SMOOTHING) -> LeafHistogram:
    v = np.clip(np.asarray(values, dtype=float), edges[0], edges[-1])
    counts = np.histogram(v, bins=edges)[0]
    p = counts + eps
    return LeafHistogram(counts, p / p.sum(), float(np.mean(v)) if len(v) else float("nan"))


def kl_divergence(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    return float(np.sum(p * np.log(p / q)))


@dataclass
class ReferenceTree:
    tree: LaTree
    edges: np.ndarray
    histograms: list

    def leaf_means(self) -> np.ndarray:
        return np.array([h.mean for h in self.histograms])

    def leaf_counts(self) -> np.ndarray:
        return np.array([h.total for h in self.histograms])


def build_reference_tree(X, y, height: int, metric_range: Optional[tuple] = None,
                         ridge: float = 1e-6, n_bins: int = N_BINS) -> ReferenceTree:
    """Learn a partition tree on a complete dataset and histogram its leaves."""
    from .dataset import Measurement

    X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    if len(y) < 2 ** height:
        warnings.warn(f"{len(y)} samples for {2 ** height} leaves; some nodes will pass through")
    tree = LaTree(X.shape[1], height, ridge)
    for i, (x, v) in enumerate(zip(X, y)):
        tree.add_sample(Measurement(x, float(v), True, i))
    tree.learn()
    tree.redistribute()
    edges = metric_bins(metric_range, n_bins)
    hists = [leaf_histogram(y[leaf.sample_ids], edges) for leaf in tree.leaves]
    return ReferenceTree(tree, edges, hists)


@dataclass
class KLPoint:
    n: int
    per_leaf: np.ndarray
    mean_kl: float
    mean_gap: float


def kl_dynamics(trace: SearchTrace, reference: ReferenceTree,
                checkpoints: Sequence[int]) -> list[KLPoint]:
    """KL divergence of sampled vs reference leaf distributions at each checkpoint.

    At checkpoint ``n`` the first ``n`` valid samples are routed through the
    reference tree.  ``per_leaf`` is NaN for leaves without samples on either
    side; ``mean_kl`` averages the rest.  ``mean_gap`` is the leaf-averaged
    difference between sampled and reference mean metric.
    """
    valid = trace.valid_records()
    X = np.array([r.encoding for r in valid], dtype=float)
    y = np.array([r.metric for r in valid], dtype=float)
    tree = reference.tree
    out = []
    for n in checkpoints:
        if n > len(valid):
            raise ValueError(f"checkpoint {n} exceeds {len(valid)} valid samples")
        leaf_ids = tree.route_many(X[:n]) if n else np.zeros(0, dtype=int)
        kls, gaps = np.full(len(tree.leaves), np.nan), []
        for j, ref in enumerate(reference.histograms):
            vals = y[:n][leaf_ids == tree.first_leaf + j]
            if len(vals) == 0 or ref.total == 0:
                continue
            h = leaf_histogram(vals, reference.edges)
            kls[j] = kl_divergence(h.probs, ref.probs)
            gaps.append(h.mean - ref.mean)
        finite = kls[np.isfinite(kls)]
        out.append(KLPoint(n, kls, float(finite.mean()) if len(finite) else float("nan"),
                           float(np.mean(gaps)) if gaps else float("nan")))
    return out


def default_checkpoints(config: SearchConfig | dict, n_valid: int) -> list[int]:
    init = config.init_samples if isinstance(config, SearchConfig) else config["init_samples"]
    return sorted({min(init, n_valid), min(2 * init, n_valid), n_valid})


# -- partition export --------------------------------------------------------

def partition_export(tree: LaTree, space: SearchSpace, grid_resolution: int,
                     objective=None, dims: tuple = (0, 1), fixed=None) -> dict:
    """Leaf assignment of every cell of a 2-D grid plus each leaf's constraints.

    ``dims`` picks the two projected dimensions of a higher-dimensional
    continuous space; the others are held at ``fixed`` (default: interval
    midpoints).  ``objective`` is any callable on encodings.
    """
    d0, d1 = dims
    for d in (d0, d1):
        if space.dims[d].is_categorical:
            raise ValueError("partition export needs continuous projected dimensions")
    if space.ndim != 2 and fixed is None and any(d.is_categorical for d in space.dims):
        raise ValueError("non-2-D space needs fixed values for the other dimensions")
    base = np.array(fixed if fixed is not None else
                    [(d.lo + d.hi) / 2 if not d.is_categorical else d.codes[0] for d in space.dims], dtype=float)
    xs = np.linspace(space.dims[d0].lo, space.dims[d0].hi, grid_resolution)
    ys = np.linspace(space.dims[d1].lo, space.dims[d1].hi, grid_resolution)
    G = np.repeat(base[None, :], grid_resolution ** 2, axis=0)
    GX, GY = np.meshgrid(xs, ys, indexing="ij")
    G[:, d0], G[:, d1] = GX.ravel(), GY.ravel()
    leaves = tree.route_many(G) if tree.learned else np.full(len(G), tree.first_leaf)
    cells = []
    for row, leaf in zip(G, leaves):
        cell = {"x": float(row[d0]), "y": float(row[d1]), "leaf": int(tree.leaf_index(int(leaf)))}
        if objective is not None:
            cell["value"] = float(objective(row))
        cells.append(cell)
    constraints = {}
    for leaf in tree.leaves:
        path = _path_to(tree, leaf.id)
        constraints[str(tree.leaf_index(leaf.id))] = [c.to_dict() for c in tree.get_constraints(path)]
    return {
        "space": space.name, "dims": list(dims), "grid_resolution": grid_resolution,
        "cells": cells, "leaf_constraints": constraints,
        "leftmost_path": tree.leftmost_path(),
        "leftmost_constraints": constraints["0"],
    }


def _path_to(tree: LaTree, node_id: int) -> list[int]:
    path = [node_id]
    while path[-1] != 0:
        path.append((path[-1] - 1) // 2)
    return path[::-1]


def leaf_cell_means(export: dict) -> dict[int, float]:
    """Mean cell value per leaf index, from an export produced with an objective."""
    acc: dict = {}
    for cell in export["cells"]:
        acc.setdefault(cell["leaf"], []).append(cell["value"])
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}
