import numpy as np
import pytest

from stdw.domains import Domain, DomainSequence
from stdw.nn_core import init_model

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model():
    return init_model([2, 5], 3, seed=3)


def make_toy_sequence(n_domains=3, n=40, d=2, k=2, seed=0):
    r = np.random.default_rng(seed)
    doms = []
    for t in range(n_domains):
        x = r.normal(size=(n, d)) + t * 0.1
        y = (x[:, 0] > t * 0.1).astype(np.int64)
        ex = r.normal(size=(n, d)) + t * 0.1
        ey = (ex[:, 0] > t * 0.1).astype(np.int64)
        doms.append(Domain(t, x, y if t == 0 else None, float(t), ex, ey))
    return DomainSequence(doms, k)


@pytest.fixture
def toy_sequence():
    return make_toy_sequence()
