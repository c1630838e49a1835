import sys

import numpy as np
import pytest

from rmmfit.geometry import UnitCellGeometry
from rmmfit.materials import CubicModuli


@pytest.fixture(scope="session")
def geom():
    return UnitCellGeometry.swiss_cross(1)


@pytest.fixture(scope="session")
def homogeneous_geom(geom):
    return geom.with_inclusion(geom.matrix)


@pytest.fixture(scope="session")
def macro():
    return CubicModuli(5.9, 0.627, 1.748)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
