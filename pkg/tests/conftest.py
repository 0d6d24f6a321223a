import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from krrf.geom2d import Footprint, Polygon, World
from krrf.models import BikeModel, BikeParams, CarModel, DiffDriveModel

settings.register_profile("krrf", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("krrf")

# synthetic vehicle: well away from the low-speed singularity
SYNTH_BIKE = BikeParams(m=1000.0, lf=1.2, lr=1.4, kf=-8.0e4, kr=-7.0e4, iz=1800.0)


def square(x0, y0, size):
    return Polygon(((x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size)))


def ring(cx, cy, inner, thickness):
    """Four walls enclosing the square of half-size ``inner`` around (cx, cy)."""
    a, b = inner, inner + thickness
    return [
        Polygon(((cx - b, cy - b), (cx + b, cy - b), (cx + b, cy - a), (cx - b, cy - a))),
        Polygon(((cx - b, cy + a), (cx + b, cy + a), (cx + b, cy + b), (cx - b, cy + b))),
        Polygon(((cx - b, cy - a), (cx - a, cy - a), (cx - a, cy + a), (cx - b, cy + a))),
        Polygon(((cx + a, cy - a), (cx + b, cy - a), (cx + b, cy + a), (cx + a, cy + a))),
    ]


@pytest.fixture
def fp():
    return Footprint(10.0, 10.0)


@pytest.fixture
def open_world(fp):
    return World((0.0, 0.0, 600.0, 600.0), (), fp)


@pytest.fixture
def car():
    return CarModel()


@pytest.fixture
def diff():
    return DiffDriveModel()


@pytest.fixture
def bike():
    return BikeModel(SYNTH_BIKE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simple_polygon(rng, n, cx=0.0, cy=0.0, r_lo=0.3, r_hi=1.0):
    """Star-shaped (hence simple) polygon with ``n`` vertices."""
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, n))
    while np.min(np.diff(np.concatenate([angles, [angles[0] + 2 * math.pi]]))) < 1e-3:
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, n))
    radii = rng.uniform(r_lo, r_hi, n)
    return Polygon(tuple((cx + r * math.cos(a), cy + r * math.sin(a)) for a, r in zip(angles, radii)))


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.acceptance_lines
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        request.config.acceptance_lines[number] = line
        print(line)
        assert ok, line

    return record
