import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinlab.family import TranslationFamily, torus_family
from kinlab.geometry import InvalidInput, torus_distance, wrap_diff
from kinlab.submanifold import (MAX_EDGE, ClosedGeodesic, Disk, GeodesicSegment, PlanePatch, ResolutionTooCoarse,
                                SubdivisionDepthExceeded, circle, discretize, from_vertices, orthonormal_frames,
                                pushforward)


def test_segment_volume_exact():
    m = discretize(GeodesicSegment((0.9, 0.9), (1.0, 2.0), 0.7), 4)
    assert m.total_volume == pytest.approx(0.7)
    assert m.num_elements == 4


def test_closed_geodesic_volume():
    m = discretize(ClosedGeodesic((0.1, 0.2), (2, 3)), 40)
    assert m.total_volume == pytest.approx(math.sqrt(13))
    assert m.elements[-1, 1] == 0


def test_circle_length_converges():
    errs = [abs(discretize(circle((0.5, 0.5), 0.2), r).total_volume - 2 * math.pi * 0.2) for r in (16, 32, 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / errs[1] == pytest.approx(0.25, rel=0.05)


def test_plane_patch_area_and_closed_torus():
    m = discretize(PlanePatch((0.1, 0.1, 0.3), (1, 0, 0), (0, 1, 0), closed=True), 4)
    assert m.total_volume == pytest.approx(1.0)
    open_patch = discretize(PlanePatch((0, 0, 0), (0.5, 0, 0), (0, 0.5, 0.5)), 3)
    assert open_patch.total_volume == pytest.approx(0.5 * math.sqrt(0.5))


def test_disk_area_converges():
    a = [discretize(Disk((0.5, 0.5, 0.5), (1, 1, 0), 0.3), r).total_volume for r in (4, 8)]
    exact = math.pi * 0.09
    assert abs(a[1] - exact) < abs(a[0] - exact) < 0.05


def test_resolution_too_coarse():
    with pytest.raises(ResolutionTooCoarse):
        discretize(GeodesicSegment((0, 0), (1, 0), 0.9), 2)
    with pytest.raises(InvalidInput):
        discretize(GeodesicSegment((0, 0), (1, 0), 0.5), 1)
    with pytest.raises(InvalidInput):
        GeodesicSegment((0, 0), (0, 0), 0.5)


def test_orthonormal_frames():
    f = orthonormal_frames(np.array([[[2.0, 1.0], [0.0, 1.0], [0.0, 0.0]]]))
    assert np.allclose(f[0].T @ f[0], np.eye(2))
    with pytest.raises(InvalidInput):
        orthonormal_frames(np.zeros((1, 2, 1)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_pushforward_translation_is_rigid(ax, ay):
    m = discretize(GeodesicSegment((0.2, 0.3), (1.0, 1.0), 0.5), 3)
    img = pushforward(m, TranslationFamily(2), np.array([ax, ay]))
    assert img.total_volume == pytest.approx(m.total_volume)
    assert np.allclose(torus_distance(img.vertices, m.vertices + [ax, ay]), 0, atol=1e-12)


def test_pushforward_identity_member(fam2):
    m = discretize(circle((0.5, 0.5), 0.2), 16)
    img = pushforward(m, fam2, np.zeros(fam2.N))
    assert np.allclose(torus_distance(img.vertices, m.vertices), 0, atol=1e-12)


def test_pushforward_refines_stretched_images():
    fam = torus_family(2, R=3.0)
    rng = np.random.default_rng(7)
    m = discretize(GeodesicSegment((0.3, 0.3), (1.0, 0.3), 0.2), 2)
    ends = m.vertices[[0, -1]]
    for _ in range(3):
        w = fam.sample(rng)
        img = pushforward(m, fam, w, tangents="chord", max_depth=24)
        assert img.max_edge() < MAX_EDGE
        assert img.num_elements >= m.num_elements
        # endpoints are carried to the image endpoints
        tips = img.vertices[[img.elements[0, 0], img.elements[-1, 1]]]
        assert np.allclose(torus_distance(tips, fam.apply(w, ends)), 0, atol=1e-12)


def test_pushforward_depth_limit():
    fam = torus_family(2)
    w = fam.sample(np.random.default_rng(8))
    m = discretize(GeodesicSegment((0.3, 0.3), (1.0, 0.3), 0.3), 2)
    with pytest.raises(SubdivisionDepthExceeded):
        pushforward(m, fam, w, max_depth=0, max_edge=1e-3)


def test_jacobian_tangents_unit():
    fam = torus_family(2, R=1.0)
    w = fam.sample(np.random.default_rng(9))
    m = discretize(circle((0.5, 0.5), 0.2), 32)
    img = pushforward(m, fam, w, tangents="jacobian")
    assert np.allclose(np.linalg.norm(img.element_tangents[:, :, 0], axis=1), 1.0)


def test_translated_mesh():
    m = discretize(GeodesicSegment((0.1, 0.1), (0, 1), 0.3), 3)
    t = m.translated([0.95, 0.0])
    assert np.allclose(wrap_diff(t.vertices - m.vertices - [0.95, 0]), 0)
    assert t.total_volume == pytest.approx(m.total_volume)
