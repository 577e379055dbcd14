import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from tubeprop.core import Box2D, ScoredBox

settings.register_profile(
    "repo", deadline=None, max_examples=100, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

unit = st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw, min_size=0.0):
    w = draw(st.floats(min_size, 1.0))
    h = draw(st.floats(min_size, 1.0))
    return Box2D(draw(unit), draw(unit), w, h)


@st.composite
def scored_boxes(draw):
    return ScoredBox(draw(boxes()), draw(st.floats(-1.0, 2.0)), draw(unit), draw(unit))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def raster_area(corners_list, res=1000):
    """Area covered by the intersection of corner boxes, counting grid-cell centers."""
    centers = (np.arange(res) + 0.5) / res
    inside_x = np.ones(res, bool)
    inside_y = np.ones(res, bool)
    for x1, y1, x2, y2 in corners_list:
        inside_x &= (centers >= x1) & (centers <= x2)
        inside_y &= (centers >= y1) & (centers <= y2)
    return inside_x.sum() * inside_y.sum() / res**2


def raster_iou(a: Box2D, b: Box2D, res=1000):
    inter = raster_area([a.corners(), b.corners()], res)
    union = raster_area([a.corners()], res) + raster_area([b.corners()], res) - inter
    return 0.0 if union == 0 else inter / union


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
