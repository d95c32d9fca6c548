import itertools
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def naive_census(Y):
    """Enumerate every tetrad {i<j} x {k<l} directly."""
    Y = np.asarray(Y)
    n_a, n_e = Y.shape
    by = [0] * 5
    two = {"disjoint": 0, "shared_actor": 0, "shared_event": 0}
    balanced = 0
    for i, j in itertools.combinations(range(n_a), 2):
        for k, l in itertools.combinations(range(n_e), 2):
            cells = [Y[i, k], Y[i, l], Y[j, k], Y[j, l]]
            n = int(sum(cells))
            by[n] += 1
            sign = np.prod([2 * c - 1 for c in cells])
            balanced += int(sign == 1)
            if n == 2:
                if (Y[i, k] and Y[i, l]) or (Y[j, k] and Y[j, l]):
                    two["shared_actor"] += 1
                elif (Y[i, k] and Y[j, k]) or (Y[i, l] and Y[j, l]):
                    two["shared_event"] += 1
                else:
                    two["disjoint"] += 1
    return by, two, balanced


def write(path, text):
    path = Path(path)
    path.write_text(text.strip() + "\n", encoding="utf-8")
    return path


@pytest.fixture
def toy_files(tmp_path):
    """3 actors x 2 events with ties (a1, e1), (a2, e1)."""
    e = write(tmp_path / "edges.csv", "actor_id,event_id\na1,e1\na2,e1")
    a = write(tmp_path / "actors.csv", "actor_id,gender,mark\na1,boy,A\na2,girl,B\na3,girl,A")
    v = write(tmp_path / "events.csv", "event_id,size\ne1,3\ne2,5")
    return e, a, v


@pytest.fixture
def small_dataset():
    from amenet.model import ModelSpec, TrueParams, simulate_network

    sim = simulate_network(ModelSpec(t=2), TrueParams(beta_d=(-0.5,)), 7, 5, seed=11)
    return sim.dataset


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
