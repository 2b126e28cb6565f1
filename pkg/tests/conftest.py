import numpy as np
import pytest

from casimir_sp import Boltzmann, DomainSpec, SolverConfig, scf_solve


@pytest.fixture(scope="session")
def box():
    return DomainSpec.box_1d(modes=64, mass=0.0)


@pytest.fixture(scope="session")
def box_m1():
    return DomainSpec.box_1d(modes=64, mass=1.0)


@pytest.fixture(scope="session")
def boltz():
    return Boltzmann(1.0)


@pytest.fixture(scope="session")
def solution(box_m1, boltz):
    return scf_solve(box_m1, boltz, SolverConfig())


@pytest.fixture(scope="session")
def solution_m0(box, boltz):
    return scf_solve(box, boltz, SolverConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
