import numpy as np
import pytest
from hypothesis import settings
from scipy.spatial.transform import Rotation

from ckfdist.body import BodyDimensions
from ckfdist.simulate import simulate_trial

settings.register_profile("ckfdist", max_examples=60, deadline=None)
settings.load_profile("ckfdist")


@pytest.fixture
def dims_simple():
    """Round numbers used throughout the worked examples."""
    return BodyDimensions(pelvis_width=0.23, thigh_left=0.45, thigh_right=0.45,
                          shank_left=0.45, shank_right=0.45)


def random_rotation(seed) -> np.ndarray:
    return Rotation.random(random_state=seed).as_matrix()


@pytest.fixture(scope="session")
def walk_trial():
    return simulate_trial("walk", sigma_dist=0.1, seed=3, duration=6.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
