import numpy as np
import pytest

from gpclt.scattering import RadialPotential, solve_neumann


@pytest.fixture(scope="session")
def soft():
    return RadialPotential.soft_sphere(2.0, 0.5)


@pytest.fixture(scope="session")
def sol100(soft):
    return solve_neumann(soft, 100, 0.49)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
