import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from secsparse.field import make_field
from secsparse.runtime import ProtocolContext

settings.register_profile("desk", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("desk")

SMALL_P = 10007
TOL = 2.0 ** -18


@pytest.fixture
def ctx():
    return ProtocolContext(3, 1, seed=7)


@pytest.fixture
def small_ctx():
    return ProtocolContext(3, 1, seed=11, field=make_field(SMALL_P))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line per acceptance criterion."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
