import numpy as np
import pytest

from latent_mcts.dataset import convnet_objective
from latent_mcts.space import make_builtin_space


@pytest.fixture(scope="session")
def toy():
    return make_builtin_space("convnet_toy")


@pytest.fixture(scope="session")
def toy_obj(toy):
    return convnet_objective(toy)


@pytest.fixture(scope="session")
def toy_data(toy, toy_obj):
    X = toy.enumerate_array()
    y = np.array([toy_obj.metric(x)[0] for x in X])
    return X, y


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES: list = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
