import math

import numpy as np
import pytest

from henondim.io import load_fixture
from henondim.julia import Target, find_periodic, sample

# fixed points of w -> w^2 - 6 + 0.3 z on the diagonal: w^2 - 0.7 w - 6 = 0
H1_FIXED_W = ((0.7 + math.sqrt(24.49)) / 2, (0.7 - math.sqrt(24.49)) / 2)


@pytest.fixture(scope="session")
def h1():
    return load_fixture("H1")


@pytest.fixture(scope="session")
def h2():
    return load_fixture("H2")


@pytest.fixture(scope="session")
def h3():
    return load_fixture("H3")


@pytest.fixture(scope="session")
def fixtures(h1, h2, h3):
    return {"H1": h1, "H2": h2, "H3": h3}


@pytest.fixture(scope="session")
def j_samples(fixtures):
    return {name: sample(g, Target.J, 4) for name, g in fixtures.items()}


@pytest.fixture(scope="session")
def searches(fixtures, j_samples):
    """Fix(g^n) for n = 1..8 on every fixture."""
    return {
        name: {n: find_periodic(g, n, j_samples[name]) for n in range(1, 9)}
        for name, g in fixtures.items()
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def report_for(fixtures):
    """Default-configuration dimension reports, computed once per fixture."""
    from henondim.report import dimension_report

    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = dimension_report(fixtures[name])
        return cache[name]

    return get


# one (criterion, verdict, detail) row per acceptance check, printed at the end
ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, verdict, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{verdict} criterion {k:2d}: {detail}")
