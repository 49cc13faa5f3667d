import numpy as np
import pytest

from twopeak.integrate import QuadratureSpec


@pytest.fixture(scope="session")
def spec():
    return QuadratureSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_run():
    """One full run of the default configuration, shared by the trend and determinism checks."""
    from twopeak.config import default_config
    from twopeak.pipeline import run_pipeline

    cfg = default_config()
    return cfg, run_pipeline(cfg)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
