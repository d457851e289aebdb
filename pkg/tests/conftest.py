import math

import numpy as np
import pytest
from hypothesis import settings

from matherkit import experiments as E
from matherkit import model
from matherkit.grids import PhaseGrid

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

EDGE = 4 / math.pi

_SPECS = {"pendulum": model.pendulum, "free": model.free}
_CACHE: dict = {}


def pipeline(name: str, c: float, compute_mane: bool = True) -> E.PipelineResult:
    """Default-grid pipeline, memoised for the whole session."""
    key = (name, round(float(c), 12))
    hit = _CACHE.get(key)
    if hit is not None and (hit.mane is not None or not compute_mane):
        return hit
    res = E.run_pipeline(_SPECS[name](), PhaseGrid(), c,
                         E.PipelineOptions(compute_mane=compute_mane))
    _CACHE[key] = res
    return res


@pytest.fixture(scope="session")
def grid():
    return PhaseGrid()


@pytest.fixture(scope="session")
def run():
    return pipeline


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
