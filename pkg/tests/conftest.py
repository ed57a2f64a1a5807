import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def coarse_grid():
    from marsrf.freqdomain import default_grid
    return default_grid(1e-5, 1e5, 40)


@pytest.fixture
def quiet():
    """Chain settings with every noise source switched off."""
    from marsrf import NoiseFloorSpec, PowerLawCoeffs
    return dict(fiber_noise=PowerLawCoeffs.zero(), floor=NoiseFloorSpec.silent())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda l: int(l.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
