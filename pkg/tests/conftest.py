from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fujita_lab.geometry import ModelManifold, RadialGrid

settings.register_profile("lab", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def r3():
    return ModelManifold(3)


@pytest.fixture(scope="session")
def small_grid(r3):
    return RadialGrid.stretched(r3, 20.0, 0.05, 1.02, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)`` returns ``ok``."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[_CRITERIA][n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
