import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qhdcascade.lambdaset import build_lambda

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk3():
    """Three generations of eight members, radius about 400 before dilation."""
    return build_lambda(3, 8, seed=0)


@pytest.fixture(scope="session")
def lam5():
    return build_lambda(5, 8, seed=0)


@pytest.fixture
def record():
    """Print and keep one pass/fail line per acceptance criterion."""
    def _record(num: int, title: str, ok: bool, detail: str, seconds: float):
        line = f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}  ({seconds:.1f}s)  {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
