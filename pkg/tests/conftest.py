import numpy as np
import pytest

from sshspectra import DisorderSpec, ScalarDistribution

atoms = ScalarDistribution.discrete


def unbalanced_spec(p=0.25):
    """t = 1, m in {2, 1/2} with probabilities {p, 1-p}."""
    return DisorderSpec.random_hopping(ScalarDistribution.point(1.0), atoms([2.0, 0.5], [p, 1 - p]))


def balanced_spec():
    """t, m i.i.d. in {2, 1/2} with equal weights."""
    d = atoms([2.0, 0.5], [0.5, 0.5])
    return DisorderSpec.random_hopping(d, d)


def two_orbital_spec():
    return DisorderSpec(L=2, m=2.0, lambda_coupling=0.5, mu_coupling=0.6,
                        omega_dist=atoms([-1.0, 1.0], [0.5, 0.5]),
                        omega_prime_dist=atoms([-1.0, 1.0], [0.4, 0.6]))


@pytest.fixture
def unb():
    return unbalanced_spec()


@pytest.fixture
def bal():
    return balanced_spec()


@pytest.fixture
def L2():
    return two_orbital_spec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
