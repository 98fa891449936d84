import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinlab import kinematic as km
from kinlab.family import TranslationFamily, random_plane, torus_family
from kinlab.geometry import GrassmannPlane, InvalidInput, TorusPoint
from kinlab.submanifold import ClosedGeodesic, GeodesicSegment, discretize

from oracles import grid_translation_integral


def test_config_hash_stable_and_order_free():
    a = km.config_hash({"x": 1, "y": [1, 2], "z": {"b": 2, "a": 1}})
    b = km.config_hash({"z": {"a": 1, "b": 2}, "y": [1, 2], "x": 1})
    assert a == b and len(a) == 16
    assert a != km.config_hash({"x": 2, "y": [1, 2], "z": {"b": 2, "a": 1}})


def test_sample_params_independent_of_chunking():
    tf = TranslationFamily(2)
    full = km.sample_params(tf, 9, 0, 1000)
    pieces = np.concatenate([km.sample_params(tf, 9, a, b) for a, b in [(0, 3), (3, 300), (300, 513), (513, 1000)]])
    assert np.array_equal(full, pieces)
    fam = torus_family(2)
    assert np.array_equal(km.sample_params(fam, 1, 250, 260), km.sample_params(fam, 1, 0, 300)[250:260])


def test_translation_oracle():
    assert km.translation_family_oracle(math.pi / 2, 1, 1) == pytest.approx(1.0)
    assert km.translation_family_oracle(0.0, 0.5, 0.5) == 0.0


def test_translation_oracle_matches_grid_quadrature():
    th = 0.9
    I = ((0.1, 0.2), (0.6, 0.0))
    J = ((0.4, 0.1), (0.7 * math.cos(th), 0.7 * math.sin(th)))
    grid = grid_translation_integral(I, J, grid=500)
    assert grid == pytest.approx(km.translation_family_oracle(th, 0.6, 0.7), rel=5e-3)


@pytest.mark.parametrize("theta,li,lj", [(math.pi / 3, 0.5, 0.5), (2.0, 0.3, 0.9)])
def test_mc_translation_close_to_oracle(theta, li, lj):
    I, J = km.geodesic_pair(theta, li, lj)
    rep = km.mc_translation_family(I, J, 20_000, 3)
    exact = km.translation_family_oracle(theta, li, lj)
    assert abs(rep.estimate - exact) <= max(0.02 * exact, 3 * rep.std_error)


def test_translation_unbiased_over_seeds():
    I, J = km.geodesic_pair(math.pi / 4, 0.8, 0.5)
    exact = km.translation_family_oracle(math.pi / 4, 0.8, 0.5)
    reps = [km.mc_translation_family(I, J, 5_000, s) for s in range(20)]
    mean = np.mean([r.estimate for r in reps])
    se = math.sqrt(sum(r.std_error ** 2 for r in reps)) / 20
    assert abs(mean - exact) <= 3 * se


def test_parallel_segments_exact_zero():
    I, J = km.geodesic_pair(0.0, 0.5, 0.8)
    rep = km.mc_translation_family(I, J, 10_000, 0, keep_samples=True)
    assert rep.estimate == 0.0 and np.all(rep.samples == 0)


def test_thread_count_does_not_change_results():
    I, J = km.geodesic_pair(1.0, 0.4, 0.6)
    a = km.mc_translation_family(I, J, 3_000, 5, threads=1)
    b = km.mc_translation_family(I, J, 3_000, 5, threads=3)
    assert a.to_dict() == b.to_dict()
    fam = torus_family(2, R=2.0, flow_step=0.05)
    V = discretize(GeodesicSegment((0.1, 0.1), (1, 0), 0.2), 2)
    W = discretize(GeodesicSegment((0.5, 0.0), (0, 1), 0.2), 2)
    r1 = km.mc_total_intersections(fam, V, W, 12, 2, threads=1)
    r2 = km.mc_total_intersections(fam, V, W, 12, 2, threads=2)
    assert r1.to_dict() == r2.to_dict()


def test_generic_estimator_agrees_with_translation_fast_path():
    I, J = km.geodesic_pair(1.1, 0.3, 0.35)
    mi, mj = discretize(I, 3), discretize(J, 3)
    tf = TranslationFamily(2)
    fast = km.mc_translation_family(mi, mj, 600, 11, keep_samples=True)
    slow = km.mc_total_intersections(tf, mi, mj, 600, 11, keep_samples=True)
    assert np.array_equal(fast.samples, slow.samples)


def test_pinned_identity_sampler_counts_V_cap_W():
    fam = torus_family(2, R=2.0)
    V = discretize(ClosedGeodesic((0.1, 0.23), (1, 0)), 24)
    W = discretize(ClosedGeodesic((0.37, 0.05), (1, 2)), 48)
    rep = km.mc_total_intersections(fam, V, W, 3, 0, sampler=lambda a, b: np.zeros((b - a, fam.N)),
                                    keep_samples=True)
    assert np.all(rep.samples == 2)


def test_mc_total_rejects_bad_dimensions():
    fam = torus_family(2, R=2.0)
    V = discretize(GeodesicSegment((0.1, 0.1), (1, 0), 0.2), 2)
    with pytest.raises(InvalidInput):
        km.mc_total_intersections(fam, V, V, 0, 0)


def test_nj_ratio_formula_vs_direct(fam2):
    rng = np.random.default_rng(21)
    for _ in range(10):
        w, p = fam2.sample(rng), rng.random(2)
        bv = random_plane(rng, 2, 1).basis
        bw = random_plane(rng, 2, 1).basis
        a = km.nj_ratio_formula(fam2, w, p, bv, bw)
        b = km.nj_ratio_direct(fam2, w, p, bv, bw)
        assert a == pytest.approx(b, rel=1e-6)


def test_nj_ratio_translation_is_sin_angle():
    tf = TranslationFamily(2)
    bv = np.array([[1.0], [0.0]])
    bw = np.array([[math.cos(0.4)], [math.sin(0.4)]])
    assert km.nj_ratio_formula(tf, np.zeros(2), np.array([0.3, 0.3]), bv, bw) == pytest.approx(math.sin(0.4))


@settings(max_examples=100)
@given(st.integers(1, 6), st.integers(0, 5), st.integers(0, 2 ** 31))
def test_graph_volume_identity_property(a, db, seed):
    b = max(1, a - db)
    g = np.random.default_rng(seed).standard_normal((b, a))
    lhs, rhs = km.graph_volume_sides(g)
    assert rhs == pytest.approx(lhs, rel=1e-9)


def test_fiber_translation_converges_to_sin_angle():
    th = 0.7
    sp = GrassmannPlane.from_span(TorusPoint([0.2, 0.3]), np.array([[1.0], [0.0]]))
    sq = GrassmannPlane.from_span(TorusPoint([0.7, 0.6]), np.array([[math.cos(th)], [math.sin(th)]]))
    rep = km.fiber_integral_estimate(TranslationFamily(2), sp, sq, 0.05, 400_000, 1)
    assert abs(rep.estimate - math.sin(th)) <= 3 * rep.std_error + 0.01


def test_fiber_tangential_contributes_zero():
    same = np.array([[1.0], [0.0]])
    sp = GrassmannPlane.from_span(TorusPoint([0.2, 0.3]), same)
    sq = GrassmannPlane.from_span(TorusPoint([0.5, 0.3]), same)
    rep = km.fiber_integral_estimate(TranslationFamily(2), sp, sq, 0.05, 100_000, 1)
    assert rep.estimate == 0.0 and rep.extra["accepted"] > 0


def test_fiber_insufficient_samples():
    sp = GrassmannPlane.from_span(TorusPoint([0.2, 0.3]), np.array([[1.0], [0.0]]))
    sq = GrassmannPlane.from_span(TorusPoint([0.7, 0.6]), np.array([[0.0], [1.0]]))
    with pytest.raises(km.InsufficientSamples):
        km.fiber_integral_estimate(TranslationFamily(2), sp, sq, 1e-4, 10, 0)
    with pytest.raises(InvalidInput):
        km.fiber_integral_estimate(TranslationFamily(2), sp, sq, 0.7, 10, 0)


def test_fiber_many_matches_single():
    fam = torus_family(2, R=2.0, flow_step=0.05)
    rng = np.random.default_rng(4)
    planes = [(random_plane(rng, 2, 1), random_plane(rng, 2, 1)) for _ in range(3)]
    many = km.fiber_integral_many(fam, planes, 0.2, 200, 8)
    one = km.fiber_integral_estimate(fam, *planes[1], 0.2, 200, 8)
    assert many[1].to_dict() == one.to_dict()


def test_c_from_ratios():
    assert km.c_from_ratios([0.5, 2.0]) == 2.0
    assert km.c_from_ratios([0.25, 1.5]) == 4.0
    assert km.c_from_ratios([1.0, 1.0]) == 1.0
    assert km.c_from_ratios([0.0, 1.0]) == math.inf


def test_empirical_C_translation_family_and_prefix():
    pairs = km.random_geodesic_pairs(4, (0.1, 0.3), seed=2)
    tf = TranslationFamily(2)
    full = km.empirical_C(tf, pairs, 4000, 3, keep_samples=True)
    half = km.empirical_C(tf, pairs, 2000, 3)
    pre = km.prefix_ratio_report(full, pairs, 2000)
    assert pre.c_emp == pytest.approx(half.c_emp, rel=1e-12)
    # ratios of the translation family are |sin theta| in expectation
    for _, r in full.ratios:
        assert 0 < r <= 1.5


def test_random_pairs_volume_span():
    pairs = km.random_geodesic_pairs(50, (0.04, 0.16), seed=4)
    vols = [V.total_volume * W.total_volume for _, V, W in pairs]
    assert max(vols) / min(vols) >= 15
    assert len({pid for pid, _, _ in pairs}) == 50


def test_report_overflow_and_log_estimate():
    with pytest.raises(OverflowError):
        km._report(np.ones(3), 800.0, 3, 0, np.zeros(3, bool), "")
    rep = km._report(np.ones(3), -9000.0, 3, 0, np.zeros(3, bool), "")
    assert rep.estimate == 0.0 and rep.log_estimate == pytest.approx(-9000.0)
