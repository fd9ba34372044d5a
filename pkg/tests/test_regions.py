import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occbench.errors import EmptyRegion, OutOfCalibratedRange
from occbench.model import ActionTube, BoundingBox
from occbench.regions import (
    BG,
    FG,
    Rect,
    RegionSpec,
    actor_region,
    actor_region_for_tubes,
    occupied_fraction,
    rect_occupied_fraction,
    region_area,
    severity_level,
)


def _tube(*boxes):
    return ActionTube("t", "a", {i: BoundingBox(*b) for i, b in enumerate(boxes)})


@pytest.mark.parametrize(
    "boxes,expected",
    [
        ([(10, 10, 20, 20), (15, 15, 30, 30)], (10, 10, 30, 30)),
        ([(5, 5, 9, 9)], (5, 5, 9, 9)),
        ([(0, 0, 4, 4), (6, 6, 8, 8)], (0, 0, 8, 8)),
        ([(1.2, 3.7, 4.1, 8.0)], (1, 3, 5, 8)),
    ],
)
def test_actor_region(boxes, expected):
    assert tuple(actor_region(_tube(*boxes)).as_list()) == expected


def test_multi_actor_envelope():
    r = actor_region_for_tubes([_tube((0, 0, 4, 4)), _tube((10, 2, 12, 9))])
    assert r.as_list() == [0, 0, 12, 9]


def test_region_area():
    fg = RegionSpec(FG, Rect(0, 0, 10, 10), 20, 20)
    bg = RegionSpec(BG, Rect(0, 0, 10, 10), 20, 20)
    assert region_area(fg) == 100
    assert region_area(bg) == 300
    assert region_area(RegionSpec(BG, Rect(0, 0, 20, 20), 20, 20)) == 0


def test_occupied_fraction_basics():
    region = RegionSpec(FG, Rect(5, 5, 15, 15), 20, 20)
    assert occupied_fraction([], region) == 0.0
    assert occupied_fraction([(np.ones((10, 10), bool), (5, 5))], region) == 1.0
    with pytest.raises(EmptyRegion):
        occupied_fraction([], RegionSpec(BG, Rect(0, 0, 20, 20), 20, 20))


def test_overlapping_footprints_union():
    # region 10x10; two 30-px footprints sharing a 10-px overlap -> 50 px
    region = RegionSpec(FG, Rect(0, 0, 10, 10), 10, 10)
    a = np.ones((3, 10), bool)  # rows 0-2
    b = np.ones((3, 10), bool)  # rows 2-4
    frac = occupied_fraction([(a, (0, 0)), (b, (0, 2))], region)
    oracle = np.zeros((10, 10), bool)
    oracle[0:3] = True
    oracle[2:5] = True
    assert frac == oracle.sum() / 100 == 0.5


def test_bg_fraction_ignores_fg_pixels():
    region = RegionSpec(BG, Rect(0, 0, 10, 10), 20, 20)
    frac = occupied_fraction([(np.ones((20, 20), bool), (0, 0))], region)
    assert frac == 1.0
    frac = occupied_fraction([(np.ones((10, 10), bool), (0, 0))], region)
    assert frac == 0.0


@pytest.mark.parametrize("fraction,level", [(0.0, 1), (0.10, 1), (0.1999, 1), (0.2, 2), (0.30, 2), (0.4, 3), (0.5999, 3)])
def test_severity_level(fraction, level):
    assert severity_level(fraction) == level


@pytest.mark.parametrize("fraction", [0.6, 0.70, 1.0])
def test_severity_above_calibrated_range(fraction):
    with pytest.raises(OutOfCalibratedRange):
        severity_level(fraction)


@given(st.floats(0.0, 0.6, exclude_max=True))
def test_bands_partition(fraction):
    lvl = severity_level(fraction)
    assert [(l - 1) * 0.2 <= fraction < l * 0.2 for l in (1, 2, 3)].count(True) == 1
    assert (lvl - 1) * 0.2 <= fraction < lvl * 0.2


boxes = st.tuples(st.integers(0, 40), st.integers(0, 40), st.integers(1, 30), st.integers(1, 30)).map(
    lambda b: (b[0], b[1], b[0] + b[2], b[1] + b[3])
)


@settings(max_examples=200, deadline=None)
@given(st.lists(boxes, min_size=1, max_size=6))
def test_actor_region_contains_boxes(bs):
    r = actor_region(_tube(*bs))
    for b in bs:
        assert r.x_min <= b[0] and r.y_min <= b[1] and b[2] <= r.x_max and b[3] <= r.y_max


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.integers(-10, 50), st.integers(-10, 50), st.integers(1, 30), st.integers(1, 30)), max_size=6),
    st.sampled_from([FG, BG]),
    boxes.filter(lambda b: b[2] <= 48 and b[3] <= 40),
)
def test_rect_fraction_matches_pixel_count(rects, kind, fg):
    region = RegionSpec(kind, Rect(*fg), 48, 40)
    if region_area(region) == 0:
        return
    rs = [Rect(x, y, x + w, y + h) for x, y, w, h in rects]
    grid = np.zeros((40, 48), bool)
    for r in rs:
        grid[max(r.y_min, 0):max(r.y_max, 0), max(r.x_min, 0):max(r.x_max, 0)] = True
    mask = region.mask()
    oracle = np.count_nonzero(grid & mask) / np.count_nonzero(mask)
    assert rect_occupied_fraction(rs, region) == oracle
    assert occupied_fraction([(np.ones((r.height, r.width), bool), (r.x_min, r.y_min)) for r in rs], region) == oracle


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 40), st.integers(0, 30), st.integers(1, 20), st.integers(1, 20)), min_size=1, max_size=6),
    st.sampled_from([FG, BG]),
)
def test_fraction_monotone(rects, kind):
    region = RegionSpec(kind, Rect(10, 8, 30, 25), 48, 40)
    fps = [(np.ones((h, w), bool), (x, y)) for x, y, w, h in rects]
    fracs = [occupied_fraction(fps[:k], region) for k in range(len(fps) + 1)]
    assert all(b >= a for a, b in zip(fracs, fracs[1:]))
