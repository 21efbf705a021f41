import numpy as np
import pytest

from gazefit.camera import CameraIntrinsics
from gazefit.model import synthetic_basis
from gazefit.synth import generate_scene


@pytest.fixture(scope="session")
def basis():
    return synthetic_basis(seed=0)


@pytest.fixture(scope="session")
def cam():
    return CameraIntrinsics.default()


@pytest.fixture(scope="session")
def scene(basis, cam):
    return generate_scene(basis, cam, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
