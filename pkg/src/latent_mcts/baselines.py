"""Comparison searchers: random search, regularized evolution and plain MCTS
over hand-designed ConvNet action spaces.

All of them emit the same :class:`~latent_mcts.trace.SearchTrace` format and
use the same unique-valid-sample budget as :func:`~latent_mcts.search.lanas_search`.
"""
from __future__ import annotations

import math
from collections import deque
from itertools import product
from typing import Optional

import numpy as np

from .dataset import EvalLedger, Objective
from .search import RUNAWAY_FACTOR, get_ucb, sample_random_in_partition
from .space import SearchSpace, encoding_key
from .trace import SearchTrace


class _Run:
    """Shared bookkeeping: ledger, trace and stopping rule."""

    def __init__(self, space: SearchSpace, objective: Objective, budget: int, seed: int,
                 config: dict, target: Optional[float] = None):
        self.space = space
        self.target = target
        self.objective = objective
        self.budget = budget
        self.ledger = EvalLedger()
        self.trace = SearchTrace({**config, "budget": budget, "seed": seed, "space": space.name}, seed)
        self.max_queries = RUNAWAY_FACTOR * budget
        self.size = space.size()

    def done(self) -> bool:
        return (self.ledger.unique_valid >= self.budget
                or self.ledger.total_queries >= self.max_queries
                or len(self.ledger.seen) >= self.size
                or (self.target is not None and self.trace.best_so_far is not None
                    and self.trace.best_so_far >= self.target))

    def evaluate(self, e, fallback: bool = False):
        m = self.objective.evaluate(e, self.ledger)
        self.trace.record(m, self.ledger.unique_valid, fallback)
        return m


def random_search(space: SearchSpace, objective: Objective, budget: int, seed: int = 0,
                  dedup: bool = True, max_tries: int = 10000,
                  target: Optional[float] = None) -> SearchTrace:
    rng = np.random.default_rng(seed)
    run = _Run(space, objective, budget, seed, {"algorithm": "random", "dedup": dedup}, target)
    while not run.done():
        prop = sample_random_in_partition(space, [], rng, max_tries, run.ledger.seen if dedup else None)
        run.evaluate(prop.encoding, prop.fallback)
    return run.trace


class Population:
    """Fixed-capacity population evicting the oldest member first."""

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ValueError("population capacity must be >= 2")
        self.capacity = capacity
        self.members: deque = deque()

    def add(self, encoding: np.ndarray, metric: float) -> None:
        self.members.append((encoding, metric))
        if len(self.members) > self.capacity:
            self.members.popleft()

    def __len__(self) -> int:
        return len(self.members)

    def tournament(self, rng: np.random.Generator, sample_size: int):
        idx = rng.choice(len(self.members), size=min(sample_size, len(self.members)), replace=False)
        return max((self.members[i] for i in sorted(idx)), key=lambda m: m[1])


def regularized_evolution(space: SearchSpace, objective: Objective, budget: int, seed: int = 0,
                          population_size: int = 100, sample_size: int = 10,
                          target: Optional[float] = None) -> SearchTrace:
    """Aging evolution: tournament-select a parent, mutate one dimension, drop the oldest."""
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    rng = np.random.default_rng(seed)
    run = _Run(space, objective, budget, seed,
               {"algorithm": "re", "population_size": population_size, "sample_size": sample_size},
               target)
    pop = Population(population_size)
    while len(pop) < population_size and not run.done():
        prop = sample_random_in_partition(space, [], rng, 10000, run.ledger.seen)
        m = run.evaluate(prop.encoding, prop.fallback)
        pop.add(m.encoding, m.metric)
    while not run.done():
        parent, _ = pop.tournament(rng, sample_size)
        m = run.evaluate(space.mutate(parent, rng))
        pop.add(m.encoding, m.metric)
    return run.trace


# -- action-space adapters ---------------------------------------------------

STOP, ADD = "stop", "add"


class ActionSpaceAdapter:
    """Hand-designed action tree over a prefix-padded ConvNet space.

    ``sequential``: per layer choose a kernel, then a filter width, then
    ``add`` another layer or ``stop``.  ``global``: choose the depth first,
    then every layer's kernel, then every layer's filter width.
    """

    def __init__(self, space: SearchSpace, kind: str):
        if kind not in ("sequential", "global"):
            raise ValueError(f"unknown adapter kind {kind!r}")
        if space.layout is None or space.pad_code is None:
            raise ValueError(f"space {space.name} has no ConvNet layout")
        self.space = space
        self.kind = kind
        self.layout = space.layout
        self.max_depth = space.ndim

    # a prefix is a tuple of actions
    def actions(self, prefix: tuple) -> list:
        if self.is_terminal(prefix):
            return []
        kernels, filters = list(self.layout.kernels), list(self.layout.filters)
        if self.kind == "global":
            if not prefix:
                return list(range(1, self.max_depth + 1))
            depth = prefix[0]
            return kernels if len(prefix) < 1 + depth else filters
        pos = len(prefix) % 3
        if pos == 0:
            return kernels
        if pos == 1:
            return filters
        return [ADD, STOP]

    def is_terminal(self, prefix: tuple) -> bool:
        if self.kind == "global":
            return bool(prefix) and len(prefix) == 1 + 2 * prefix[0]
        if prefix and prefix[-1] == STOP:
            return True
        # the last layer needs no add/stop decision
        return len(prefix) == 3 * self.max_depth - 1

    def layers(self, prefix: tuple) -> list[tuple[int, int]]:
        if self.kind == "global":
            depth = prefix[0]
            return list(zip(prefix[1:1 + depth], prefix[1 + depth:]))
        return [(prefix[i], prefix[i + 1]) for i in range(0, len(prefix) - 1, 3)]

    def decode(self, prefix: tuple) -> np.ndarray:
        if not self.is_terminal(prefix):
            raise ValueError(f"incomplete action sequence {prefix}")
        codes = [self.layout.code_of(k, f) for k, f in self.layers(prefix)]
        codes += [self.space.pad_code] * (self.max_depth - len(codes))
        return self.space.make_encoding(codes)

    def encode(self, e) -> tuple:
        e = np.asarray(e, dtype=float)
        depth = self.space.depth(e)
        layers = [self.layout.decode(c) for c in e[:depth]]
        if self.kind == "global":
            return (depth,) + tuple(k for k, _ in layers) + tuple(f for _, f in layers)
        seq: list = []
        for i, (k, f) in enumerate(layers):
            seq += [k, f]
            if i < self.max_depth - 1:
                seq.append(ADD if i < depth - 1 else STOP)
        return tuple(seq)

    def random_completion(self, prefix: tuple, rng: np.random.Generator) -> tuple:
        prefix = tuple(prefix)
        while not self.is_terminal(prefix):
            acts = self.actions(prefix)
            prefix += (acts[int(rng.integers(len(acts)))],)
        return prefix

    def completions(self, prefix: tuple):
        """Every complete action sequence extending ``prefix``."""
        if self.is_terminal(prefix):
            yield prefix
            return
        for a in self.actions(prefix):
            yield from self.completions(prefix + (a,))


def make_action_adapter(space: SearchSpace, kind: str) -> ActionSpaceAdapter:
    return ActionSpaceAdapter(space, kind)


class _MCTSNode:
    __slots__ = ("prefix", "children", "untried", "n", "v_sum", "exhausted")

    def __init__(self, prefix: tuple, actions: list):
        self.prefix = prefix
        self.children: dict = {}
        self.untried = list(actions)
        self.n = 0
        self.v_sum = 0.0
        self.exhausted = False


def vanilla_mcts(space: SearchSpace, objective: Objective, adapter: ActionSpaceAdapter,
                 budget: int, seed: int = 0, c: float = 0.1, dedup: bool = True,
                 rollout_tries: int = 64, target: Optional[float] = None) -> SearchTrace:
    """Select / expand / random rollout / back-propagate over ``adapter``'s action tree.

    Terminal nodes may be revisited; re-evaluating a known network costs a
    query but no unique sample.  With ``dedup`` rollouts avoid already
    evaluated networks and subtrees whose every completion has been
    evaluated are skipped during selection.
    """
    rng = np.random.default_rng(seed)
    run = _Run(space, objective, budget, seed, {"algorithm": f"mcts_{adapter.kind}", "c": c, "dedup": dedup},
               target)
    root = _MCTSNode((), adapter.actions(()))
    seen = run.ledger.seen

    def rollout(node: _MCTSNode) -> Optional[np.ndarray]:
        for _ in range(rollout_tries if dedup else 1):
            e = adapter.decode(adapter.random_completion(node.prefix, rng))
            if not dedup or encoding_key(e) not in seen:
                return e
        fresh = [p for p in adapter.completions(node.prefix)
                 if encoding_key(adapter.decode(p)) not in seen]
        if not fresh:
            return None
        return adapter.decode(fresh[int(rng.integers(len(fresh)))])

    while not run.done() and not root.exhausted:
        node, path = root, [root]
        while not node.untried and node.children:
            live = [ch for ch in node.children.values() if not ch.exhausted]
            if not live:
                break
            scores = [get_ucb(ch.v_sum, ch.n, node.n, c) for ch in live]
            node = live[int(np.argmax(scores))]
            path.append(node)
        if node.untried:
            a = node.untried.pop(int(rng.integers(len(node.untried))))
            child = _MCTSNode(node.prefix + (a,), adapter.actions(node.prefix + (a,)))
            node.children[a] = child
            node, path = child, path + [child]
        e = rollout(node)
        if e is None:
            node.exhausted = True
            for parent in reversed(path[:-1]):
                if parent.untried or any(not ch.exhausted for ch in parent.children.values()):
                    break
                parent.exhausted = True
            continue
        m = run.evaluate(e)
        for nd in path:
            nd.n += 1
            nd.v_sum += m.metric
    return run.trace


def count_adapter_leaves(adapter: ActionSpaceAdapter) -> int:
    return sum(1 for _ in adapter.completions(()))
