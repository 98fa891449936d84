import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinlab.geometry import InvalidInput
from kinlab.intersect import count_curve_curve_t2, count_intersections, write_records_csv
from kinlab.submanifold import ClosedGeodesic, GeodesicSegment, PlanePatch, circle, discretize

from oracles import grid_crossings_closed_geodesics


def closed(start, wind, res=None):
    g = ClosedGeodesic(start, wind)
    return discretize(g, res or max(8, int(np.ceil(g.length / 0.05))))


@pytest.mark.parametrize("p,q", [(1, 1), (1, 2), (2, 3), (3, 1), (1, -2)])
def test_closed_geodesics_match_grid_oracle(p, q):
    a0, b0 = (0.1312, 0.3731), (0.7077, 0.0519)
    res = count_intersections(closed(a0, (1, 0)), closed(b0, (p, q)))
    assert res.count == abs(q)
    assert res.count == grid_crossings_closed_geodesics(a0, (1, 0), b0, (p, q))
    assert not res.any_degenerate


@settings(max_examples=40, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-3, 3), st.integers(-3, 3),
       st.floats(0, 1), st.floats(0, 1))
def test_closed_geodesics_homological_count(a, b, c, d, x, y):
    from math import gcd
    if (a, b) == (0, 0) or (c, d) == (0, 0) or gcd(a, b) != 1 or gcd(c, d) != 1 or a * d - b * c == 0:
        return
    A = closed((0.11, 0.23), (a, b))
    B = closed((x, y), (c, d))
    res = count_intersections(A, B)
    if not res.any_degenerate:
        assert res.count == abs(a * d - b * c)


def test_segments_cross_across_seam():
    A = discretize(GeodesicSegment((0.95, 0.5), (1.0, 0.0), 0.1), 2)
    B = discretize(GeodesicSegment((0.02, 0.45), (0.0, 1.0), 0.1), 2)
    assert count_curve_curve_t2(A, B).count == 1


def test_parallel_segments_no_transversal_meet():
    A = discretize(GeodesicSegment((0.1, 0.5), (1.0, 0.0), 0.3), 3)
    B = discretize(GeodesicSegment((0.2, 0.5), (1.0, 0.0), 0.3), 3)
    res = count_intersections(A, B)
    assert res.count == 0


def test_shared_vertex_counted_once():
    # crossing exactly at an interior vertex of A
    A = discretize(GeodesicSegment((0.1, 0.5), (1.0, 0.0), 0.2), 2)
    B = discretize(GeodesicSegment((0.2, 0.4), (0.0, 1.0), 0.2), 2)
    res = count_intersections(A, B)
    assert res.count == 1


def test_circle_and_line():
    C = discretize(circle((0.5, 0.5), 0.2), 64)
    L = closed((0.0, 0.5), (1, 0))
    assert count_intersections(C, L).count == 2


def test_curve_surface_t3():
    plane = discretize(PlanePatch((0.0, 0.0, 0.3), (1, 0, 0), (0, 1, 0), closed=True), 4)
    line = discretize(ClosedGeodesic((0.2, 0.7, 0.0), (0, 1, 2)), 64)
    res = count_intersections(line, plane)
    assert res.count == 2
    swapped = count_intersections(plane, line)
    assert swapped.count == 2


def test_dimension_mismatch():
    A = closed((0, 0), (1, 0))
    with pytest.raises(InvalidInput):
        count_intersections(A, discretize(PlanePatch((0, 0, 0), (1, 0, 0), (0, 1, 0), closed=True), 4))


def test_records_csv(tmp_path):
    res = count_intersections(closed((0.1, 0.2), (1, 0)), closed((0.3, 0.1), (1, 2)))
    path = tmp_path / "r.csv"
    write_records_csv(res.records, path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == res.count
    assert all(float(r["sin_angle"]) > 0 for r in rows)
