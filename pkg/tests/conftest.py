import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from brennan.conformal import solve_parameter_problem
from brennan.grafting import group_pair
from brennan.polygon import build_polygon, polygon_from_vertices

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def regular_polygon(n, radius=1.0):
    return radius * np.exp(2j * np.pi * np.arange(n) / n)


def random_moebius_entries(rng, size=10.0):
    """Four complex entries of modulus <= size with a non-tiny determinant."""
    while True:
        r = size * np.sqrt(rng.uniform(0, 1, 4))
        e = r * np.exp(2j * np.pi * rng.uniform(0, 1, 4))
        if abs(e[0] * e[3] - e[1] * e[2]) > 1e-2:
            return e


@pytest.fixture(scope="session")
def pair():
    return group_pair()


@pytest.fixture(scope="session")
def square_map():
    return solve_parameter_problem(polygon_from_vertices([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]), center=0)


@pytest.fixture(scope="session")
def ngon_map():
    return solve_parameter_problem(polygon_from_vertices(regular_polygon(12)), center=0)


@pytest.fixture(scope="session")
def domain_polygon(pair):
    return build_polygon(100, 12, 7, pair)


@pytest.fixture(scope="session")
def domain_map(domain_polygon):
    return solve_parameter_problem(domain_polygon, center=0)


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
