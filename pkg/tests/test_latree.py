import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latent_mcts.dataset import Measurement
from latent_mcts.latree import (LaTree, UntrainedTreeError, count_violations, fit_node_regressor,
                                leftmost_bound_diagnostic, leftmost_leaf_bound, node_threshold,
                                satisfies)


def normal_equations(X, y, lam):
    """Independent oracle: solve the augmented normal equations directly."""
    A = np.hstack([X, np.ones((len(X), 1))])
    P = lam * np.eye(A.shape[1])
    P[-1, -1] = 0.0                       # intercept not penalized
    theta = np.linalg.solve(A.T @ A + P, A.T @ y)
    return theta[:-1], theta[-1]


def make_tree(X, y, height=3, **kw):
    tree = LaTree(X.shape[1], height, **kw)
    for i, (x, v) in enumerate(zip(X, y)):
        tree.add_sample(Measurement(np.asarray(x, dtype=float), float(v), True, i))
    tree.learn()
    tree.redistribute()
    return tree


def test_regressor_matches_normal_equations():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n, d = rng.integers(10, 60), rng.integers(1, 8)
        X = rng.normal(size=(n, d))
        y = X @ rng.normal(size=d) + rng.normal(scale=0.1, size=n) + 3.0
        model = fit_node_regressor(X, y, 1e-6)
        w, b = normal_equations(X, y, 1e-6)
        np.testing.assert_allclose(model.w, w, rtol=1e-6, atol=1e-9)
        assert model.b == pytest.approx(b, rel=1e-6)


def test_regressor_exact_line():
    X = np.array([[0.0], [1.0], [2.0]])
    m = fit_node_regressor(X, 2 * X[:, 0] + 1, ridge=0.0)
    assert m.w[0] == pytest.approx(2.0) and m.b == pytest.approx(1.0)


@pytest.mark.parametrize("X,y", [
    (np.ones((5, 3)), np.arange(5.0)),         # constant design
    (np.array([[1.0, 2.0]]), np.array([0.7])),  # one sample
])
def test_regressor_degenerate(X, y):
    m = fit_node_regressor(X, y)
    assert np.all(m.w == 0) and m.b == pytest.approx(y.mean())


def test_threshold_is_mean():
    v = np.random.default_rng(3).uniform(size=77)
    assert node_threshold(v) == pytest.approx(v.mean(), abs=1e-9)
    assert node_threshold([]) == 0.0


def test_routing_conservation_and_constraints(toy_data):
    X, y = toy_data
    tree = make_tree(X, y, height=4)
    leaves = tree.leaves
    assert sum(l.n for l in leaves) == len(y)
    for node in tree.nodes:
        if not node.is_leaf:
            assert node.n == tree.nodes[node.left].n + tree.nodes[node.right].n
    # every sample satisfies its own leaf's constraints
    for sid in range(0, len(X), 37):
        leaf, path = tree.route(X[sid])
        assert len(path) == tree.height + 1 and path[-1] == leaf
        assert satisfies(tree.get_constraints(path), X[sid])
        assert sid in tree.nodes[leaf].sample_ids


def test_route_many_agrees_with_route(toy_data):
    X, y = toy_data
    tree = make_tree(X[::3], y[::3], height=3)
    ids = tree.route_many(X[:200])
    assert [tree.route(x)[0] for x in X[:200]] == ids.tolist()


def test_untrained_route_raises():
    with pytest.raises(UntrainedTreeError):
        LaTree(2, 2).route(np.zeros(2))


def test_passthrough_routes_left():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    tree = make_tree(X, np.array([0.1, 0.9]), height=3)
    # root splits the two samples; deeper nodes hold at most one and pass through
    assert not tree.root.passthrough
    for node in tree.nodes[1:tree.first_leaf]:
        assert node.passthrough
    leaves = {tree.route(x)[0] for x in X}
    assert leaves == {tree.first_leaf, tree.first_leaf + 4}


def test_good_samples_go_left():
    X = np.linspace(0, 1, 20)[:, None]
    tree = make_tree(X, X[:, 0], height=1)
    left = tree.nodes[1]
    assert sorted(left.sample_ids) == list(range(10, 20))
    assert left.mean > tree.nodes[2].mean


def test_back_propagate_updates_path():
    X = np.linspace(0, 1, 20)[:, None]
    tree = make_tree(X, X[:, 0], height=2)
    leaf, path = tree.route(np.array([0.95]))
    before = [tree.nodes[i].n for i in path]
    tree.back_propagate(path, Measurement(np.array([0.95]), 0.95, True, 99))
    assert [tree.nodes[i].n for i in path] == [b + 1 for b in before]
    assert len(tree.samples) == 21


def test_count_violations():
    X = np.linspace(0, 1, 20)[:, None]
    tree = make_tree(X, X[:, 0], height=2)
    cons = tree.get_constraints(tree.leftmost_path())
    v = count_violations(cons, np.array([[1.0], [0.0]]))
    assert v[0] == 0 and v[1] >= 1


def test_json_round_trip(toy_data):
    X, y = toy_data
    tree = make_tree(X[:300], y[:300], height=3)
    back = LaTree.from_dict(tree.to_dict())
    assert back.to_json() == tree.to_json()
    assert [n.sample_ids for n in back.nodes] == [sorted(n.sample_ids) for n in tree.nodes]


def test_bound_closed_form():
    assert leftmost_leaf_bound(100, 10, 3) == pytest.approx(30.0, abs=1e-12)
    for n, h in [(100, 3), (1364, 4), (7, 1)]:
        assert leftmost_leaf_bound(n, 0, h) == pytest.approx(n / 2 ** h, abs=1e-12)


def test_bound_diagnostic_on_reference(toy_data):
    X, y = toy_data
    rep = leftmost_bound_diagnostic(make_tree(X, y, height=4))
    assert np.isfinite(rep.bound) and rep.leftmost_count >= 0
    assert len(rep.deltas) == 4 and rep.delta_max == max(rep.deltas)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 80), h=st.integers(1, 5))
def test_conservation_property(seed, n, h):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, size=(n, 3)).astype(float)
    y = rng.uniform(size=n)
    tree = make_tree(X, y, height=h)
    assert sum(l.n for l in tree.leaves) == n
    assert tree.root.v_sum == pytest.approx(y.sum())
