import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dualsrc.cost import Instance
from dualsrc.demand import make_demand

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def ref_demand():
    return make_demand(1, [(0, 0.5), (2, 0.5)])


@pytest.fixture
def ref_instance(ref_demand):
    return Instance(h=1, b=1, c_R=0, c_E=1, L=6, L0=0, demand=ref_demand)


def random_instance(rng: np.random.Generator, L: int = 4, L0: int = 0, max_atoms: int = 4, max_value: int = 4):
    """Random instance on the integer lattice with at most ``max_atoms`` atoms."""
    while True:
        n = int(rng.integers(2, max_atoms + 1))
        vals = np.sort(rng.choice(max_value + 1, size=n, replace=False))
        p = rng.dirichlet(np.ones(n))
        if p.min() < 0.02:
            continue
        d = make_demand(1, [(float(v), float(q)) for v, q in zip(vals, p / p.sum())])
        c_R = float(rng.uniform(0, 1))
        return Instance(
            h=float(rng.uniform(0.5, 3)),
            b=float(rng.uniform(1, 10)),
            c_R=c_R,
            c_E=c_R + float(rng.uniform(0.2, 3)),
            L=L,
            L0=L0,
            demand=d,
        )


@st.composite
def demands(draw, max_atoms=4, max_value=5):
    n = draw(st.integers(2, max_atoms))
    vals = draw(st.lists(st.integers(0, max_value), min_size=n, max_size=n, unique=True))
    w = draw(st.lists(st.integers(1, 20), min_size=n, max_size=n))
    tot = sum(w)
    return make_demand(1, [(v, x / tot) for v, x in zip(sorted(vals), w)])


@st.composite
def instances(draw, L=4, L0=None):
    d = draw(demands())
    l0 = draw(st.integers(0, 1)) if L0 is None else L0
    c_R = draw(st.sampled_from([0.0, 0.5, 1.0]))
    return Instance(
        h=draw(st.floats(0.5, 3)),
        b=draw(st.floats(0.5, 10)),
        c_R=c_R,
        c_E=c_R + draw(st.floats(0.1, 4)),
        L=max(L, l0 + 2),
        L0=l0,
        demand=d,
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
