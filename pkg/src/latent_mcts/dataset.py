"""Objective functions and evaluation accounting.

Every objective maps an encoding to a :class:`Measurement` and records the
query in an :class:`EvalLedger`.  Higher metric is always better.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .space import SearchSpace, encoding_key, make_builtin_space

FLOOR_ZERO = "floor_zero"
ERROR = "error"


class MissingArchitectureError(KeyError):
    pass


class TabularFormatError(ValueError):
    pass


@dataclass
class Measurement:
    encoding: np.ndarray
    metric: float
    valid: bool
    step: int

    def __post_init__(self):
        if self.valid and not math.isfinite(self.metric):
            raise ValueError(f"valid measurement with non-finite metric {self.metric}")


@dataclass
class EvalLedger:
    """Tracks distinct queried encodings and how many of them were valid."""

    seen: set = field(default_factory=set)
    unique_valid: int = 0
    total_queries: int = 0

    def record(self, key: tuple, valid: bool) -> int:
        """Register one query and return its step index."""
        step = self.total_queries
        self.total_queries += 1
        if key not in self.seen:
            self.seen.add(key)
            if valid:
                self.unique_valid += 1
        return step


class Objective:
    """Base objective: subclasses implement :meth:`metric`."""

    space: SearchSpace
    v_star: Optional[float] = None

    def metric(self, e: np.ndarray) -> tuple[float, bool]:
        raise NotImplementedError

    def evaluate(self, e, ledger: EvalLedger) -> Measurement:
        e = np.asarray(e, dtype=float)
        value, valid = self.metric(e)
        step = ledger.record(encoding_key(e), valid)
        return Measurement(e.copy(), float(value), valid, step)


class FunctionObjective(Objective):
    """Wraps a deterministic callable; every query is valid."""

    def __init__(self, space: SearchSpace, fn: Callable[[np.ndarray], float],
                 v_star: Optional[float] = None, name: str = ""):
        self.space = space
        self.fn = fn
        self.v_star = v_star
        self.name = name or getattr(fn, "__name__", "objective")

    def metric(self, e):
        return float(self.fn(e)), True


class TabularBenchmark(Objective):
    """Architecture -> metric lookup table, NASBench style."""

    def __init__(self, space: SearchSpace, rows: dict, missing_policy: str = FLOOR_ZERO):
        if missing_policy not in (FLOOR_ZERO, ERROR):
            raise ValueError(f"unknown missing policy {missing_policy!r}")
        if not rows:
            raise TabularFormatError("a tabular benchmark needs at least one row")
        for key in rows:
            if not space.is_valid(np.array(key)):
                raise TabularFormatError(f"row {key} is not valid in space {space.name}")
        self.space = space
        self.rows = dict(rows)
        self.missing_policy = missing_policy
        self.v_star = max(self.rows.values())

    def metric(self, e):
        key = encoding_key(e)
        if key in self.rows:
            return self.rows[key], True
        if self.missing_policy == ERROR:
            raise MissingArchitectureError(key)
        return 0.0, False

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        keys = list(self.rows)
        return np.array(keys, dtype=float), np.array([self.rows[k] for k in keys])


def load_tabular(path, space: Optional[SearchSpace] = None,
                 missing_policy: str = FLOOR_ZERO, nasbench: bool = False) -> TabularBenchmark:
    """Read a ``d0,...,dK,metric`` CSV into a :class:`TabularBenchmark`.

    With ``nasbench=True`` a 27-column file (21 binary + 5 ternary + metric)
    is mapped onto the ``nasbench_like`` space whatever its header says.
    """
    if nasbench:
        space = make_builtin_space("nasbench_like")
    if space is None:
        raise ValueError("a space is required unless nasbench=True")
    rows: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TabularFormatError(f"{path}: empty file")
        if not nasbench and (header[-1].strip() != "metric" or len(header) != space.ndim + 1):
            raise TabularFormatError(f"{path}: header must be d0..d{space.ndim - 1},metric")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != space.ndim + 1:
                raise TabularFormatError(
                    f"{path}:{lineno}: expected {space.ndim + 1} columns, got {len(row)}")
            try:
                values = [float(x) for x in row]
            except ValueError as exc:
                raise TabularFormatError(f"{path}:{lineno}: {exc}") from None
            key = encoding_key(values[:-1])
            metric = values[-1]
            if not math.isfinite(metric):
                raise TabularFormatError(f"{path}:{lineno}: non-finite metric")
            if key in rows and rows[key] != metric:
                raise TabularFormatError(f"{path}:{lineno}: duplicate key {key} with conflicting metric")
            rows[key] = metric
    return TabularBenchmark(space, rows, missing_policy)


def save_tabular(bench: TabularBenchmark, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"d{i}" for i in range(bench.space.ndim)] + ["metric"])
        for key, metric in bench.rows.items():
            w.writerow([repr(v) for v in key] + [repr(metric)])


def evaluate(bench: Objective, e, ledger: EvalLedger) -> Measurement:
    return bench.evaluate(e, ledger)


# -- synthetic ConvNet metric ------------------------------------------------

def synthetic_convnet_metric(e, space: Optional[SearchSpace] = None) -> float:
    """Deterministic stand-in for trained accuracy on ConvNet spaces.

    ``0.5 * depth / max_depth + 0.4 * filter_score + 0.1 * kernel_score``,
    where ``filter_score`` is the mean over real layers of the filter-width
    rank scaled to [0, 1] (widest = 1) and ``kernel_score`` the mean of the
    kernel rank scaled so that 3x3 = 1 and the largest kernel = 0.
    The all-empty network scores 0.  The unique optimum is the deepest
    network with the widest filters and all-3x3 kernels, scoring 1.
    """
    e = np.asarray(e, dtype=float)
    if space is None:
        space = make_builtin_space("convnet_toy")
    layout = space.layout
    if layout is None or space.pad_code is None or not space.is_valid(e, allow_empty=True):
        raise ValueError(f"{e.tolist()} is not a valid ConvNet encoding")
    depth = space.depth(e)
    if depth == 0:
        return 0.0
    nf, nk = len(layout.filters), len(layout.kernels)
    f_score = k_score = 0.0
    for code in e[:depth]:
        kernel, filters = layout.decode(code)
        f_score += layout.filters.index(filters) / (nf - 1) if nf > 1 else 1.0
        k_score += (nk - 1 - layout.kernels.index(kernel)) / (nk - 1) if nk > 1 else 1.0
    return 0.5 * depth / space.ndim + 0.4 * f_score / depth + 0.1 * k_score / depth


def convnet_objective(space: SearchSpace) -> FunctionObjective:
    return FunctionObjective(space, lambda e: synthetic_convnet_metric(e, space),
                             v_star=1.0, name="synthetic_convnet_metric")


def enumerate_objective(space: SearchSpace, objective: Objective) -> tuple[np.ndarray, np.ndarray]:
    """All encodings of a finite space and their metrics (no ledger)."""
    X = space.enumerate_array()
    y = np.array([objective.metric(x)[0] for x in X])
    return X, y


# -- eggholder ---------------------------------------------------------------

EGGHOLDER_ARGMIN = (512.0, 404.2319)


def eggholder(e) -> float:
    """Eggholder surface ``f(x, y)``; global minimum near (512, 404.2319)."""
    x, y = float(e[0]), float(e[1])
    return (-(y + 47.0) * math.sin(math.sqrt(abs(x / 2.0 + y + 47.0)))
            - x * math.sin(math.sqrt(abs(x - (y + 47.0)))))


def eggholder_grid(resolution: int = 2049) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = np.linspace(-512.0, 512.0, resolution)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    F = (-(Y + 47.0) * np.sin(np.sqrt(np.abs(X / 2.0 + Y + 47.0)))
         - X * np.sin(np.sqrt(np.abs(X - (Y + 47.0)))))
    return X, Y, F


def eggholder_objective(negate: bool = True, grid_resolution: int = 2049) -> FunctionObjective:
    """Eggholder as a maximization problem; ``v_star`` is the grid optimum of ``-f``."""
    space = make_builtin_space("eggholder2d")
    sign = -1.0 if negate else 1.0
    F = eggholder_grid(grid_resolution)[2]
    v_star = float((sign * F).max())
    return FunctionObjective(space, lambda e: sign * eggholder(e), v_star=v_star,
                             name="neg_eggholder" if negate else "eggholder")
