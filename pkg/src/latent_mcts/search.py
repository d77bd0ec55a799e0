"""Search over a learned partition tree.

Each round relearns the tree on every valid sample collected so far, replays
the samples to rebuild visit counts, then makes ``selects_per_relearn``
proposals: UCB descent to a leaf, sampling inside the leaf's half-space
constraints, evaluation and back-propagation.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .dataset import EvalLedger, Objective
from .latree import Constraint, LaTree, count_violations, fit_node_regressor
from .space import SearchSpace, encoding_key, encoding_keys
from .trace import SearchTrace

RUNAWAY_FACTOR = 50


@dataclass
class SearchConfig:
    height: int = 8
    selects_per_relearn: int = 50
    init_samples: int = 200
    c: Optional[float] = None
    sampler: str = "random"
    dedup: bool = True
    budget: int = 1000
    seed: int = 0
    max_reject_tries: int = 10000
    ridge: float = 1e-6
    min_fit: int = 2
    pool_size: int = 1000
    ensemble_size: int = 10
    target: Optional[float] = None
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.height < 1:
            raise ValueError("height must be >= 1")
        if self.budget < self.init_samples:
            raise ValueError("budget must be >= init_samples")
        if self.c is not None and self.c < 0:
            raise ValueError("c must be non-negative")
        if self.sampler not in ("random", "bayes"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.selects_per_relearn < 1:
            raise ValueError("selects_per_relearn must be >= 1")

    def exploration(self, space: SearchSpace) -> float:
        """``c`` if set, else 0.1 times the span of the metric range hint."""
        if self.c is not None:
            return float(self.c)
        if space.metric_range_hint is not None:
            lo, hi = space.metric_range_hint
            return 0.1 * (hi - lo)
        return 0.1

    def to_dict(self) -> dict:
        return asdict(self)


class SearchAborted(RuntimeError):
    """The objective failed; ``trace`` holds everything evaluated before."""

    def __init__(self, trace: SearchTrace, cause: BaseException):
        super().__init__(f"objective failed after {len(trace)} evaluations: {cause!r}")
        self.trace = trace


# -- selection ---------------------------------------------------------------

def get_ucb(v_sum_next: float, n_next: int, n_curt: int, c: float) -> float:
    if n_next == 0:
        return math.inf
    return v_sum_next / n_next + 2.0 * c * math.sqrt(2.0 * math.log(n_curt) / n_next)


def ucb_select(tree: LaTree, c: float) -> tuple[list[int], int]:
    """Descend from the root to the child with the larger UCB (ties left).

    Returns the full root-to-leaf path and the leaf id.
    """
    node = tree.root
    path = [node.id]
    while not node.is_leaf:
        left, right = tree.nodes[node.left], tree.nodes[node.right]
        l_ucb = get_ucb(left.v_sum, left.n, node.n, c)
        r_ucb = get_ucb(right.v_sum, right.n, node.n, c)
        node = left if l_ucb >= r_ucb else right
        path.append(node.id)
    return path, node.id


# -- proposal ----------------------------------------------------------------

@dataclass
class Proposal:
    encoding: np.ndarray
    fallback: bool
    tries: int


def sample_random_in_partition(space: SearchSpace, constraints: Sequence[Constraint],
                               rng: np.random.Generator, max_tries: int = 10000,
                               exclude: Optional[set] = None) -> Proposal:
    """Rejection sampling inside the region cut out by ``constraints``.

    Uniform draws are tested in growing batches; the first one satisfying
    every constraint (and absent from ``exclude``) wins.  After ``max_tries``
    failures the draw with the fewest violations is returned as a fallback,
    preferring draws outside ``exclude``.
    """
    tries = 0
    batch = 8
    fallback, fallback_viol, stale = None, math.inf, None
    while tries < max_tries:
        k = min(batch, max_tries - tries)
        C = space.sample_uniform(rng, size=k)
        viol = count_violations(constraints, C)
        # stable order keeps draw order among equally violating candidates
        for i in np.argsort(viol, kind="stable"):
            if viol[i] >= fallback_viol:
                break
            if exclude is None or encoding_key(C[i]) not in exclude:
                if viol[i] == 0:
                    return Proposal(C[i], False, tries + int(i) + 1)
                fallback, fallback_viol = C[i], viol[i]
                break
            if stale is None:
                stale = C[i]
        tries += k
        batch = min(batch * 2, 1024)
    return Proposal(fallback if fallback is not None else stale, True, tries)


def sample_pool_in_partition(space: SearchSpace, constraints: Sequence[Constraint],
                             rng: np.random.Generator, pool_size: int,
                             max_tries: int = 10000, exclude: Optional[set] = None) -> np.ndarray:
    """Up to ``pool_size`` distinct draws satisfying ``constraints``."""
    pool: dict = {}
    tries = 0
    while tries < max_tries and len(pool) < pool_size:
        k = min(1024, max_tries - tries)
        C = space.sample_uniform(rng, size=k)
        ok = count_violations(constraints, C) == 0
        for key, row, good in zip(encoding_keys(C), C, ok):
            if good and key not in pool and (exclude is None or key not in exclude):
                pool[key] = row
                if len(pool) == pool_size:
                    break
        tries += k
    return np.array(list(pool.values())).reshape(-1, space.ndim)


class SurrogateEnsemble:
    """Bootstrap ensemble of ridge linear models giving a mean and a spread."""

    def __init__(self, n_members: int = 10, ridge: float = 1e-6):
        if n_members < 2:
            raise ValueError("an ensemble needs at least two members")
        self.n_members = n_members
        self.ridge = ridge
        self.members = []

    def fit(self, X, y, rng: np.random.Generator) -> "SurrogateEnsemble":
        X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
        if len(y) < 2:
            raise ValueError("need at least two samples to fit the ensemble")
        self.members = []
        for _ in range(self.n_members):
            idx = rng.integers(0, len(y), size=len(y))
            self.members.append(fit_node_regressor(X[idx], y[idx], self.ridge))
        return self

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        P = np.array([m.predict(np.atleast_2d(X)) for m in self.members])
        return P.mean(axis=0), P.std(axis=0)


def expected_improvement(mu, sigma, best: float) -> np.ndarray:
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    gain = mu - best
    ei = np.maximum(gain, 0.0)
    pos = sigma > 0
    z = gain[pos] / sigma[pos]
    ei[pos] = gain[pos] * norm.cdf(z) + sigma[pos] * norm.pdf(z)
    return np.maximum(ei, 0.0)


def sample_bayes_in_partition(space: SearchSpace, constraints: Sequence[Constraint],
                              X, y, rng: np.random.Generator, pool_size: int = 1000,
                              max_tries: int = 10000, exclude: Optional[set] = None,
                              ensemble_size: int = 10, ridge: float = 1e-6) -> Proposal:
    """Pick the expected-improvement maximizer from a pool drawn in the partition."""
    if len(y) < 2:
        return sample_random_in_partition(space, constraints, rng, max_tries, exclude)
    surrogate = SurrogateEnsemble(ensemble_size, ridge).fit(X, y, rng)
    pool = sample_pool_in_partition(space, constraints, rng, pool_size, max_tries, exclude)
    if len(pool) == 0:
        return sample_random_in_partition(space, constraints, rng, max_tries, exclude)
    mu, sigma = surrogate.predict(pool)
    ei = expected_improvement(mu, sigma, float(np.max(y)))
    return Proposal(pool[int(np.argmax(ei))], False, len(pool))


# -- main loop ---------------------------------------------------------------

def lanas_search(config: SearchConfig, objective: Objective,
                 space: Optional[SearchSpace] = None) -> SearchTrace:
    """Run the learn/select/sample/back-propagate loop until the budget is spent.

    The budget counts unique valid samples.  Total queries are capped at
    ``50 * budget``.  Invalid evaluations are traced and ledgered but never
    enter the tree's sample store.
    """
    space = space or objective.space
    cfg = config
    c = cfg.exploration(space)
    rng = np.random.default_rng(cfg.seed)
    ledger = EvalLedger()
    tree = LaTree(space.ndim, cfg.height, cfg.ridge, cfg.min_fit)
    trace = SearchTrace({**cfg.to_dict(), "c": c, "algorithm": "lanas", "space": space.name}, cfg.seed)
    exclude = ledger.seen if cfg.dedup else None
    max_queries = RUNAWAY_FACTOR * cfg.budget
    space_size = space.size()

    def done() -> bool:
        if ledger.unique_valid >= cfg.budget or ledger.total_queries >= max_queries:
            return True
        if cfg.dedup and len(ledger.seen) >= space_size:
            return True
        best = trace.best_so_far
        return cfg.target is not None and best is not None and best >= cfg.target

    def step(path, constraints) -> None:
        if cfg.sampler == "bayes" and path is not None and len(tree.samples) >= 2:
            prop = sample_bayes_in_partition(space, constraints, tree.X, tree.y, rng, cfg.pool_size,
                                             cfg.max_reject_tries, exclude, cfg.ensemble_size, cfg.ridge)
        else:
            prop = sample_random_in_partition(space, constraints, rng, cfg.max_reject_tries, exclude)
        try:
            m = objective.evaluate(prop.encoding, ledger)
        except Exception as exc:
            trace.final_tree = tree.to_dict()
            raise SearchAborted(trace, exc) from exc
        trace.record(m, ledger.unique_valid, prop.fallback)
        if m.valid:
            if path is None:
                tree.add_sample(m)
            else:
                tree.back_propagate(path, m)

    while ledger.unique_valid < cfg.init_samples and not done():
        step(None, [])

    while not done():
        if not tree.samples:
            step(None, [])
            continue
        tree.learn()
        tree.redistribute()
        if cfg.keep_snapshots:
            trace.snapshots.append(tree.to_dict(include_samples=False))
        for _ in range(cfg.selects_per_relearn):
            if done():
                break
            path, _leaf = ucb_select(tree, c)
            step(path, tree.get_constraints(path))

    if tree.samples:
        tree.learn()
        tree.redistribute()
    trace.final_tree = tree.to_dict()
    return trace
