"""Latent-action partition tree.

A complete binary tree of height ``h`` (``2**h`` leaves) stored in heap
order: node ``i`` has children ``2i + 1`` (left, predicted-good) and
``2i + 2`` (right).  Every internal node owns a ridge linear regressor ``f``
and a threshold equal to the mean metric of the samples routed to it.  A
sample goes left iff ``f(a) >= threshold``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import Measurement

GEQ = "geq"
LT = "lt"


def predict_linear(w: np.ndarray, b: float, X: np.ndarray) -> np.ndarray:
    """``X @ w + b`` computed row by row, identically for any batch size."""
    return (np.asarray(X, dtype=float) * w).sum(axis=-1) + b


@dataclass
class LinearModel:
    w: np.ndarray
    b: float

    def predict(self, X) -> np.ndarray:
        return predict_linear(self.w, self.b, X)


def fit_node_regressor(X, y, ridge: float = 1e-6) -> LinearModel:
    """Ridge least squares ``min sum (w.a + b - v)^2 + ridge * |w|^2``.

    The intercept is not penalized.  Fewer than two samples, a constant
    design, or a rank-deficient design with ``ridge == 0`` yield the constant
    model ``w = 0, b = mean(v)`` (``b = 0`` when empty).
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    d = X.shape[1] if X.size else 0
    if n == 0:
        return LinearModel(np.zeros(d), 0.0)
    if n < 2:
        return LinearModel(np.zeros(d), float(np.mean(y)))
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    if not np.any(np.ptp(X, axis=0) > 0):
        return LinearModel(np.zeros(d), float(np.mean(y)))
    y_mean = y.mean()
    if ridge == 0.0:
        if np.linalg.matrix_rank(Xc) < d:
            return LinearModel(np.zeros(d), float(np.mean(y)))
        w = np.linalg.lstsq(Xc, y - y_mean, rcond=None)[0]
    else:
        A = np.vstack([Xc, math.sqrt(ridge) * np.eye(d)])
        rhs = np.concatenate([y - y_mean, np.zeros(d)])
        w = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return LinearModel(w, float(y_mean - x_mean @ w))


def node_threshold(metrics: Sequence[float]) -> float:
    """Mean metric of a node's samples; 0 for an empty node."""
    if len(metrics) == 0:
        return 0.0
    return float(np.mean(metrics))


@dataclass(frozen=True)
class Constraint:
    """Half-space ``w.a + b >= threshold`` (geq) or ``< threshold`` (lt)."""

    w: tuple
    b: float
    threshold: float
    direction: str

    def holds(self, X) -> np.ndarray:
        f = predict_linear(np.asarray(self.w), self.b, X)
        return f >= self.threshold if self.direction == GEQ else f < self.threshold

    def to_dict(self) -> dict:
        return {"w": list(self.w), "b": self.b, "threshold": self.threshold,
                "direction": self.direction}


def satisfies(constraints: Sequence[Constraint], e) -> bool:
    return all(bool(c.holds(e)) for c in constraints)


def count_violations(constraints: Sequence[Constraint], X) -> np.ndarray:
    """Number of violated constraints per row of ``X``."""
    X = np.atleast_2d(X)
    out = np.zeros(len(X), dtype=int)
    for c in constraints:
        out += ~c.holds(X)
    return out


@dataclass
class TreeNode:
    id: int
    depth: int
    model: LinearModel
    threshold: float = 0.0
    n: int = 0
    v_sum: float = 0.0
    sample_ids: list = field(default_factory=list)
    trained: bool = False
    passthrough: bool = True
    left: Optional[int] = None
    right: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def mean(self) -> float:
        return self.v_sum / self.n if self.n else float("nan")

    def goes_left(self, X) -> np.ndarray:
        if self.passthrough:
            return np.ones(len(np.atleast_2d(X)), dtype=bool)
        return self.model.predict(X) >= self.threshold


class UntrainedTreeError(RuntimeError):
    pass


class LaTree:
    """Partition tree over a sample store of valid measurements.

    :param ndim: encoding length.
    :param height: number of split levels; the tree has ``2**height`` leaves.
    :param ridge: ridge penalty for node regressors.
    :param min_fit: nodes with fewer samples become pass-through (all left).
    """

    def __init__(self, ndim: int, height: int, ridge: float = 1e-6, min_fit: int = 2):
        if height < 1:
            raise ValueError("height must be >= 1")
        self.ndim = ndim
        self.height = height
        self.ridge = ridge
        self.min_fit = min_fit
        self.samples: list[Measurement] = []
        self._X = np.empty((0, ndim))
        self._y = np.empty(0)
        self.learned = False
        self.nodes: list[TreeNode] = []
        n_nodes = 2 ** (height + 1) - 1
        first_leaf = 2 ** height - 1
        for i in range(n_nodes):
            depth = int(math.floor(math.log2(i + 1)))
            node = TreeNode(i, depth, LinearModel(np.zeros(ndim), 0.0))
            if i < first_leaf:
                node.left, node.right = 2 * i + 1, 2 * i + 2
            self.nodes.append(node)

    # -- geometry ---------------------------------------------------------

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def first_leaf(self) -> int:
        return 2 ** self.height - 1

    @property
    def leaves(self) -> list[TreeNode]:
        return self.nodes[self.first_leaf:]

    def leaf_index(self, node_id: int) -> int:
        """Left-to-right position of a leaf (0 = leftmost)."""
        return node_id - self.first_leaf

    def leftmost_path(self) -> list[int]:
        return [2 ** k - 1 for k in range(self.height + 1)]

    # -- sample store -----------------------------------------------------

    @property
    def X(self) -> np.ndarray:
        if len(self._X) != len(self.samples):
            self._X = np.array([m.encoding for m in self.samples], dtype=float).reshape(-1, self.ndim)
            self._y = np.array([m.metric for m in self.samples], dtype=float)
        return self._X

    @property
    def y(self) -> np.ndarray:
        self.X
        return self._y

    def add_sample(self, m: Measurement) -> int:
        self.samples.append(m)
        return len(self.samples) - 1

    # -- learning ---------------------------------------------------------

    def learn(self) -> None:
        """Fit every node top-down on the samples routed to it."""
        if not self.samples:
            raise ValueError("cannot learn a tree without samples")
        X, y = self.X, self.y
        self.root.sample_ids = list(range(len(y)))
        for node in self.nodes:
            ids = np.asarray(node.sample_ids, dtype=int)
            node.threshold = node_threshold(y[ids])
            node.trained = len(ids) >= 1
            if node.is_leaf:
                continue
            if len(ids) < self.min_fit:
                node.passthrough = True
                node.model = LinearModel(np.zeros(self.ndim), 0.0)
            else:
                node.model = fit_node_regressor(X[ids], y[ids], self.ridge)
                node.passthrough = False
            left = node.goes_left(X[ids]) if len(ids) else np.zeros(0, dtype=bool)
            self.nodes[node.left].sample_ids = ids[left].tolist()
            self.nodes[node.right].sample_ids = ids[~left].tolist()
        self.learned = True

    def route_many(self, X) -> np.ndarray:
        """Leaf id for every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ids = np.zeros(len(X), dtype=int)
        for _ in range(self.height):
            nxt = np.empty_like(ids)
            for nid in np.unique(ids):
                mask = ids == nid
                node = self.nodes[nid]
                left = node.goes_left(X[mask])
                nxt[mask] = np.where(left, node.left, node.right)
            ids = nxt
        return ids

    def route(self, e) -> tuple[int, list[int]]:
        """Deterministic descent; returns ``(leaf_id, path)`` with ``h + 1`` ids."""
        if not self.learned:
            raise UntrainedTreeError("route() needs a learned tree")
        e = np.asarray(e, dtype=float)
        path = [0]
        node = self.root
        while not node.is_leaf:
            node = self.nodes[node.left if node.goes_left(e[None, :])[0] else node.right]
            path.append(node.id)
        return node.id, path

    def get_constraints(self, path: Sequence[int]) -> list[Constraint]:
        """One half-space per non-pass-through internal node of a root-to-leaf path."""
        out = []
        for nid, child in zip(path[:-1], path[1:]):
            node = self.nodes[nid]
            if node.passthrough:
                continue
            direction = GEQ if child == node.left else LT
            out.append(Constraint(tuple(node.model.w.tolist()), node.model.b, node.threshold, direction))
        return out

    def redistribute(self) -> None:
        """Reset statistics and replay every stored sample along its route."""
        for node in self.nodes:
            node.n, node.v_sum, node.sample_ids = 0, 0.0, []
        if not self.samples:
            return
        leaf_ids = self.route_many(self.X)
        for sid, (leaf, v) in enumerate(zip(leaf_ids, self.y)):
            nid = int(leaf)
            while True:
                node = self.nodes[nid]
                node.n += 1
                node.v_sum += v
                node.sample_ids.append(sid)
                if nid == 0:
                    break
                nid = (nid - 1) // 2

    def back_propagate(self, path: Sequence[int], m: Measurement) -> None:
        """Store ``m`` and credit it to every node on ``path``."""
        sid = self.add_sample(m)
        for nid in path:
            node = self.nodes[nid]
            node.n += 1
            node.v_sum += m.metric
            node.sample_ids.append(sid)

    # -- serialization ----------------------------------------------------

    def to_dict(self, include_samples: bool = True) -> dict:
        d = {
            "height": self.height, "ridge": self.ridge, "min_fit": self.min_fit,
            "ndim": self.ndim, "learned": self.learned,
            "nodes": [
                {"id": nd.id, "depth": nd.depth, "w": nd.model.w.tolist(), "b": nd.model.b,
                 "threshold": nd.threshold, "n": nd.n, "v_sum": nd.v_sum,
                 "passthrough": nd.passthrough,
                 "children": [] if nd.is_leaf else [nd.left, nd.right]}
                for nd in self.nodes
            ],
        }
        if include_samples:
            d["samples"] = [{"encoding": m.encoding.tolist(), "metric": m.metric, "step": m.step}
                            for m in self.samples]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LaTree":
        tree = cls(d["ndim"], d["height"], d["ridge"], d.get("min_fit", 2))
        for m in d.get("samples", []):
            tree.add_sample(Measurement(np.asarray(m["encoding"], dtype=float), m["metric"], True, m["step"]))
        for nd, raw in zip(tree.nodes, d["nodes"]):
            nd.model = LinearModel(np.asarray(raw["w"], dtype=float), raw["b"])
            nd.threshold, nd.n, nd.v_sum = raw["threshold"], raw["n"], raw["v_sum"]
            nd.passthrough = raw["passthrough"]
        tree.learned = d["learned"]
        if tree.learned and tree.samples:
            # sample ids are derivable from the stored samples
            leaf_ids = tree.route_many(tree.X)
            for sid, leaf in enumerate(leaf_ids):
                nid = int(leaf)
                while True:
                    tree.nodes[nid].sample_ids.append(sid)
                    if nid == 0:
                        break
                    nid = (nid - 1) // 2
        return tree

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), sort_keys=True)


def learn_tree(tree: LaTree) -> None:
    tree.learn()


def route(tree: LaTree, e) -> tuple[int, list[int]]:
    return tree.route(e)


def redistribute(tree: LaTree) -> None:
    tree.redistribute()


# -- partition-size diagnostic ----------------------------------------------

def leftmost_leaf_bound(n_samples: int, delta_max: float, height: int) -> float:
    """Worst-case leftmost-leaf population ``2*delta_max*(1 - 2**-h) + N / 2**h``."""
    return 2.0 * delta_max * (1.0 - 2.0 ** -height) + n_samples / 2.0 ** height


@dataclass
class BoundReport:
    deltas: list
    delta_max: int
    n_samples: int
    height: int
    bound: float
    leftmost_count: int

    @property
    def within_bound(self) -> bool:
        return self.leftmost_count <= self.bound


def leftmost_bound_diagnostic(tree: LaTree) -> BoundReport:
    """Compare the leftmost leaf's sample count with the partition-error bound.

    The partition error of a node is estimated as the number of its samples
    whose metric lies strictly between the sample mean and the sample median.
    """
    y = tree.y
    deltas = []
    for nid in tree.leftmost_path()[:-1]:
        ids = tree.nodes[nid].sample_ids
        if not ids:
            deltas.append(0)
            continue
        v = y[ids]
        lo, hi = sorted((float(np.mean(v)), float(np.median(v))))
        deltas.append(int(np.sum((v > lo) & (v < hi))))
    delta_max = max(deltas) if deltas else 0
    n = len(tree.samples)
    leaf = tree.nodes[tree.leftmost_path()[-1]]
    return BoundReport(deltas, delta_max, n, tree.height,
                       leftmost_leaf_bound(n, delta_max, tree.height), leaf.n)
