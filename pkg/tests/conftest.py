import numpy as np
import pytest
from hypothesis import settings

from xxcentral import build_model, field_from_angle, make_distribution

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

_ACCEPTANCE: list[tuple[int, bool, str]] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    _ACCEPTANCE.append((number, passed, line))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


def small_model(n=5, theta=np.pi / 4, kind="sqrt_decreasing", g=1.0, norm=1.0):
    return build_model(make_distribution(kind, n, 1.0), g, field_from_angle(norm, theta))


@pytest.fixture
def model5():
    return small_model(5)


@pytest.fixture
def tilted_model():
    """N = 5 with an asymmetric, tilted field and irregular couplings."""
    from xxcentral import CouplingDistribution

    dist = CouplingDistribution.custom([0.9, 0.55, 0.31, 0.2])
    return build_model(dist, 1.3, (0.37, -0.21, 0.64))
