import numpy as np
import pytest

from thinrod.geometry import build_frame, circular_arc, straight_line
from thinrod.limits import Material
from thinrod.section import build_section, section_constants


@pytest.fixture(scope="session")
def disc3():
    return build_section({"kind": "disc", "radius": 1.0, "refine": 3})


@pytest.fixture(scope="session")
def disc3_constants(disc3):
    return section_constants(disc3)


@pytest.fixture(scope="session")
def disc2():
    return build_section({"kind": "disc", "radius": 1.0, "refine": 2})


@pytest.fixture(scope="session")
def material():
    return Material(lam=1.0, mu=1.0)


@pytest.fixture(scope="session")
def straight_z():
    line = straight_line((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), 1.0)
    return line, build_frame(line)


@pytest.fixture(scope="session")
def quarter_arc():
    line = circular_arc(1.0, np.pi / 2)
    return line, build_frame(line)
