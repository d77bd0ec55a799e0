import math

import numpy as np
import pytest

from latent_mcts.dataset import (EGGHOLDER_ARGMIN, EvalLedger, MissingArchitectureError,
                                 TabularBenchmark, TabularFormatError, convnet_objective, eggholder,
                                 eggholder_grid, eggholder_objective, evaluate, load_tabular,
                                 save_tabular, synthetic_convnet_metric)
from latent_mcts.space import encoding_key, make_builtin_space

# frozen oracle values, computed by hand-rolled arithmetic outside the package
EGG_AT_ORIGIN = -25.460337185286313
EGG_AT_ARGMIN = -959.6406627106155
TOY_MEAN = 0.7171554252199414


def test_eggholder_spot_values():
    assert eggholder([0.0, 0.0]) == pytest.approx(EGG_AT_ORIGIN, abs=1e-9)
    assert eggholder(EGGHOLDER_ARGMIN) == pytest.approx(EGG_AT_ARGMIN, abs=1e-9)
    assert eggholder([0.0, 0.0]) == pytest.approx(-47 * math.sin(math.sqrt(47)), rel=1e-12)


def test_eggholder_argmin_beats_grid():
    F = eggholder_grid(2049)[2]
    assert F.min() >= EGG_AT_ARGMIN - 1e-9
    assert F.min() - EGG_AT_ARGMIN < 0.1


def test_eggholder_continuity(rng):
    for p in rng.uniform(-500, 500, size=(50, 2)):
        assert abs(eggholder(p) - eggholder(p + 1e-9)) < 1e-5


def test_eggholder_objective_negates():
    obj = eggholder_objective(grid_resolution=257)
    assert obj.metric([0.0, 0.0]) == (pytest.approx(-EGG_AT_ORIGIN), True)
    assert 900 < obj.v_star < 960


def test_synthetic_metric_optimum(toy, toy_data):
    X, y = toy_data
    assert synthetic_convnet_metric([toy.pad_code] * 5) == 0.0
    best = toy.make_encoding([toy.layout.code_of(3, 64)] * 5)
    assert synthetic_convnet_metric(best) == 1.0
    assert np.sum(y == y.max()) == 1 and y.max() == 1.0
    assert y.mean() == pytest.approx(TOY_MEAN, abs=1e-12)


def test_depth_term_dominates(toy, toy_data):
    X, y = toy_data
    depth = np.array([toy.depth(x) for x in X])
    assert y[depth == 4].max() < y[depth == 5].max()


def test_synthetic_metric_on_appendix_space():
    sp = make_builtin_space("convnet_appendix")
    best = [sp.layout.code_of(3, 96)] * 5
    assert synthetic_convnet_metric(best, sp) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        synthetic_convnet_metric([0.5, 0.5], sp)


def test_ledger_counts_unique_valid(toy, toy_obj):
    led = EvalLedger()
    e = toy.make_encoding([0.2, 1.0, 1.0, 1.0, 1.0])
    a = evaluate(toy_obj, e, led)
    b = evaluate(toy_obj, e, led)
    assert a.metric == b.metric and a.valid and b.valid
    assert led.unique_valid == 1 and led.total_queries == 2
    assert (a.step, b.step) == (0, 1)


def _bench(missing="floor_zero"):
    sp = make_builtin_space("nasbench_like")
    rng = np.random.default_rng(0)
    rows = {encoding_key(sp.sample_uniform(rng)): float(v) for v in rng.uniform(0.8, 0.95, 50)}
    return TabularBenchmark(sp, rows, missing)


def test_tabular_missing_policies():
    bench = _bench()
    absent = np.zeros(26)
    assert encoding_key(absent) not in bench.rows
    led = EvalLedger()
    m = bench.evaluate(absent, led)
    assert (m.metric, m.valid, led.unique_valid) == (0.0, False, 0)
    with pytest.raises(MissingArchitectureError):
        _bench("error").evaluate(absent, EvalLedger())


def test_tabular_present_key_twice():
    bench = _bench()
    key = next(iter(bench.rows))
    led = EvalLedger()
    first, second = bench.evaluate(np.array(key), led), bench.evaluate(np.array(key), led)
    assert first.metric == second.metric == bench.rows[key]
    assert led.unique_valid == 1


def test_tabular_round_trip(tmp_path):
    bench = _bench()
    path = tmp_path / "bench.csv"
    save_tabular(bench, path)
    back = load_tabular(path, nasbench=True)
    assert back.rows == bench.rows and back.v_star == bench.v_star


def test_tabular_format_errors(tmp_path, toy):
    p = tmp_path / "t.csv"
    p.write_text("d0,d1,d2,d3,d4,metric\n0.2,1.0,1.0,1.0,1.0,0.5\n0.2,1.0,1.0,1.0,1.0,0.6\n")
    with pytest.raises(TabularFormatError, match="duplicate"):
        load_tabular(p, toy)
    p.write_text("d0,d1,d2,d3,d4,metric\n0.2,1.0,1.0\n")
    with pytest.raises(TabularFormatError, match="columns"):
        load_tabular(p, toy)
    p.write_text("d0,d1,d2,d3,d4,metric\n0.2,1.0,1.0,1.0,1.0,abc\n")
    with pytest.raises(TabularFormatError):
        load_tabular(p, toy)
    p.write_text("a,b\n")
    with pytest.raises(TabularFormatError, match="header"):
        load_tabular(p, toy)
    p.write_text("d0,d1,d2,d3,d4,metric\n0.2,0.4,1.0,1.0,1.0,0.7\n")
    assert load_tabular(p, toy).v_star == 0.7


def test_convnet_objective_v_star(toy):
    assert convnet_objective(toy).v_star == 1.0
