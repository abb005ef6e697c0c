import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from cohortxai.dataset import engineer_roi_features, generate_synthetic  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cohort():
    cfg = {"n_subjects": 120, "n_pairs": 4, "informative": {0: 1.5}, "cognitive_effect": 1.0,
           "missing_rate": 0.02}
    return generate_synthetic(cfg, 7)


@pytest.fixture(scope="session")
def engineered(cohort):
    return engineer_roi_features(cohort)


@pytest.fixture(scope="session")
def xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    return X, y


@pytest.fixture(scope="session")
def separable():
    r = np.random.default_rng(3)
    X = r.normal(size=(120, 4))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    return X, y
