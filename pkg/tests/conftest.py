import numpy as np
import pytest

from shapesync import matso
from shapesync.ensemble import EnsembleState, regular_polygon, regular_simplex


def random_state(seed, n=4, d=3, angular=0.5, box=2.0, scales=None):
    rng = np.random.default_rng(seed)
    shape = regular_simplex(d) if d >= 3 else regular_polygon(3, d=d) if d == 2 else regular_simplex(1)
    return EnsembleState(
        rng.uniform(-box, box, (n, d)),
        rng.standard_normal((n, d)),
        np.array([matso.random_rotation(rng, d) for _ in range(n)]),
        np.array([matso.random_skew(rng, d, angular) for _ in range(n)]),
        (shape,),
        scales,
    )


@pytest.fixture
def make_state():
    return random_state


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
