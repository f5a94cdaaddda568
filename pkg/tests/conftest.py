import sys

import numpy as np
import pytest

from mocaplab import pipeline
from mocaplab.skeleton import default_model


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance-criteria lines where capture cannot hide them."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def ring_rig():
    return pipeline.default_ring_rig()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def random_rigid(rng):
    """Random rigid transform built from axis rotations and a translation."""
    from mocaplab import geometry

    m = geometry.translation(rng.uniform(-10, 10, 3))
    for axis in "xyz":
        m = geometry.multiply(m, geometry.rotation(axis, rng.uniform(-np.pi, np.pi)))
    return m
