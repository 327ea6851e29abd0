import numpy as np
import pytest

from exact_estimation.models import FiniteOracleChain, random_doeblin_matrix


def oracle_chains():
    """Three fixed finite chains; the first two split on a strict subset or with lam < 1."""
    two = FiniteOracleChain(np.array([[0.3, 0.7], [0.6, 0.4]]))
    five = FiniteOracleChain(random_doeblin_matrix(5, np.random.default_rng(5)), small_set=(0, 1, 2))
    ten = FiniteOracleChain(random_doeblin_matrix(10, np.random.default_rng(10)))
    return {2: two, 5: five, 10: ten}


@pytest.fixture(scope="session")
def chains():
    return oracle_chains()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
