import numpy as np
import pytest

from prefgame.games import APPENDIX_E_INIT, APPENDIX_E_NASH, appendix_e_game


@pytest.fixture
def game():
    return appendix_e_game()


@pytest.fixture
def init():
    return APPENDIX_E_INIT.copy()


@pytest.fixture
def nash():
    return APPENDIX_E_NASH.copy()


def random_policy(rng, n, low=0.0):
    p = rng.dirichlet(np.ones(n)) + low
    return p / p.sum()


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    lines = [test_acceptance.RESULTS[k] for k in sorted(test_acceptance.RESULTS)]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
