from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from perturbed_riemann.flux import make_flux
from perturbed_riemann.profiles import CompositeInitialData, PeriodicProfile

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def burgers():
    return make_flux("burgers")


@pytest.fixture(scope="session")
def wiggles():
    """The two perturbations used throughout the large-time studies."""
    return PeriodicProfile.cos(0.3, 1.0), PeriodicProfile.sin(0.2, 1.5)


def composite(ul: float, ur: float, wl, wr, N: float = 2.0, middle=None) -> CompositeInitialData:
    return CompositeInitialData(ul, ur, wl, wr, N, middle)


def grid_min(func, a: float, b: float, n: int = 200001) -> tuple[float, float]:
    """Brute-force grid oracle: (argmin, min) on a dense uniform grid."""
    x = np.linspace(a, b, n)
    v = func(x)
    k = int(np.argmin(v))
    return float(x[k]), float(v[k])


# {{{ acceptance summary

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Print one PASS/FAIL line per acceptance criterion and keep it for the
    terminal summary."""

    def record(label: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("C", 1)[1].split(" ", 1)[0])):
            terminalreporter.write_line(line)

# }}}
