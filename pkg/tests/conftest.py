import math

import pytest
from hypothesis import HealthCheck, settings

from sfl.model import Shape, SourceConfig

settings.register_profile("sfl", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("sfl")

ACCEPTANCE_LINES: list[str] = []


def ring(r0: float, m: int = 2, sigma_r: float = 0.01, sigma_z: float = 0.05,
         amplitude=(0.0, 0.0, 1.0), capital_omega=None, omega: float = 1.0) -> SourceConfig:
    return SourceConfig(m=m, omega=omega,
                        capital_omega=m / 12.0 if capital_omega is None else capital_omega,
                        radial=Shape("gaussian", r0, sigma_r), axial=Shape("gaussian", 0.0, sigma_z),
                        amplitude=tuple(amplitude))


@pytest.fixture
def sub_cfg():
    return ring(0.875)


@pytest.fixture
def super_cfg():
    return ring(1.25)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
