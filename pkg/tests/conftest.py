import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir():
    return DATA_DIR


def smooth_images(rng, count, size=28, sigma=1.5):
    """Band-limited unit-range images zeroed outside the inscribed disk."""
    from scipy.ndimage import gaussian_filter

    from priorcanon.groups.cyclic import disk_mask

    out = np.empty((count, 1, size, size))
    mask = disk_mask(size, 1.0)
    for i in range(count):
        a = gaussian_filter(rng.uniform(0, 1, (size, size)), sigma)
        a = (a - a.min()) / (a.max() - a.min())
        out[i, 0] = a * mask
    return out


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
