import math

import numpy as np
import pytest

from hopfkit.errors import ConfigurationError, DomainError
from hopfkit.problem import catalog_lookup
from hopfkit.regularity import (all_type_one_check, crossing_check, estimate_theta,
                                injectivity_check, plane_singleton_check, sample_points,
                                strip_bound, viscosity_audit)

CROSS_T = math.sqrt(10) / (2 * math.sqrt(2) - math.sqrt(5))
CROSS_X = 2 * (math.sqrt(2) - math.sqrt(5)) / (2 * math.sqrt(2) - math.sqrt(5))


def with_constants(gamma, mu, horizon):
    return catalog_lookup("zero-h").replace(semiconvexity=gamma, semiconcavity=1.0 / mu,
                                            horizon=horizon)


def test_strip_bound_log_example(log_pair):
    assert strip_bound(log_pair[0]) == pytest.approx(0.25)


@pytest.mark.parametrize("gamma, mu, horizon, expected", [(1.0, 2.0, 10.0, 1.0),
                                                          (1e-9, 1.0, 1.0, 1.0),
                                                          (0.0, 1.0, 4.0, 4.0)])
def test_strip_bound_formula(gamma, mu, horizon, expected):
    assert strip_bound(with_constants(gamma, mu, horizon)) == pytest.approx(expected)


def test_strip_bound_needs_constants(linear_pair):
    with pytest.raises(ConfigurationError):
        strip_bound(linear_pair[0])


def test_theta_log_example(log_pair):
    rep = estimate_theta(*log_pair, (-3, 3), nodes=61)
    assert rep.theta_estimate == pytest.approx(0.5, abs=0.01)
    assert rep.theoretical_bound == pytest.approx(0.25)
    assert rep.theoretical_bound <= rep.theta_estimate
    t_w, x_w = rep.witness
    assert 0.5 < t_w < 0.51 and x_w == pytest.approx([0.0], abs=1e-12)
    assert rep.level_spacing == pytest.approx((3.0 - 3.0 / 2**12) / 2**12)


def test_theta_sqrt_example(sqrt_pair):
    rep = estimate_theta(*sqrt_pair, (-3, 3), nodes=61)
    assert rep.theta_estimate == pytest.approx(1.0, abs=0.01)
    assert rep.witness[0] > 1.0


def test_theta_linear_sigma_has_no_witness(linear_pair):
    spec, view = linear_pair
    rep = estimate_theta(spec, view, (-3, 3), nodes=21)
    assert rep.theta_estimate == spec.horizon and rep.no_witness
    assert ("note", "no witness found in window") in rep.records()


def test_theta_rejects_few_levels(log_pair):
    with pytest.raises(ConfigurationError):
        estimate_theta(*log_pair, (-1, 1), levels=3)


def test_theta_conditions_attached(log_pair):
    rep = estimate_theta(*log_pair, (-1, 1), nodes=21, levels=6, conditions=True)
    assert set(rep.condition_results) == {"injectivity", "plane-singleton", "all-type-one"}
    assert rep.condition_results["plane-singleton"].passed


def test_injectivity(log_pair, zero_pair):
    assert injectivity_check(log_pair[0], 0.25)
    bad = injectivity_check(log_pair[0], 2.0)
    assert not bad and bad.witness[0] < bad.witness[1]
    assert injectivity_check(zero_pair[0], 1.5)


def test_injectivity_2d():
    spec = catalog_lookup("log-example", dim=2)
    assert injectivity_check(spec, 0.25, (-3, 3), nodes=2500)
    assert not injectivity_check(spec, 2.0, (-3, 3), nodes=2500)


def test_injectivity_time_range(log_pair):
    with pytest.raises(DomainError):
        injectivity_check(log_pair[0], 3.0)


def test_plane_singleton(log_pair, linear_pair):
    assert plane_singleton_check(*log_pair, 0.5, (-3, 3), nodes=61)
    res = plane_singleton_check(*log_pair, 1.0, (-3, 3), nodes=61)
    assert not res and res.witness == (1.0, [0.0])
    assert plane_singleton_check(*linear_pair, 1.3, (-3, 3), nodes=31)


def test_all_type_one(log_pair, zero_pair):
    assert all_type_one_check(*log_pair, 0.25, (-2, 2), nodes=41)
    res = all_type_one_check(*log_pair, 2.0, (0.0, 0.8), nodes=5)
    assert not res and res.witness[0] == 2.0
    assert all_type_one_check(*zero_pair, 1.0, (-2, 2), nodes=21)


def test_crossing_log_example_early(log_pair):
    rep = crossing_check(*log_pair, (0.05, 0.45), (-2, 2), samples=9)
    assert rep.passed and rep.certified


def test_crossing_sqrt_near_meeting_point(sqrt_pair):
    rep = crossing_check(*sqrt_pair, (CROSS_T - 0.1, CROSS_T + 0.1), (CROSS_X - 0.2, CROSS_X + 0.2),
                         samples=5)
    assert not rep.passed and rep.certified
    assert all(len(anchors) >= 2 for _, _, anchors in rep.crossings)


def test_crossing_zero_h(zero_pair):
    assert crossing_check(*zero_pair, (0.1, 1.9), (-2, 2), samples=7).passed


def test_viscosity_regular_point(log_pair):
    rep = viscosity_audit(*log_pair, points=[[0.25, 0.3]], h=1e-4)
    assert len(rep.regular) == 1 and rep.regular[0].residual <= 1e-3
    assert rep.passed


def test_viscosity_zero_h(zero_pair):
    rep = viscosity_audit(*zero_pair, samples=10, h=1e-4)
    assert len(rep.regular) == 10 and np.max(rep.residuals) <= 1e-6


def test_viscosity_singular_point_is_strict(log_pair):
    rep = viscosity_audit(*log_pair, points=np.empty((0, 2)), singular_points=[(1.0, 0.0)],
                          hull_samples=11)
    (aud,) = rep.singular
    assert aud.ok and aud.note.startswith("strict")
    # 11 evenly spaced hull samples hit the midpoint q = 0 where p + H(q) peaks
    assert aud.alpha == pytest.approx(math.log(2), abs=1e-6)
    assert aud.min_margin >= -1e-8


def test_viscosity_random_points_are_routed(log_pair):
    rep = viscosity_audit(*log_pair, samples=8, h=1e-4, seed=3)
    assert len(rep.regular) == 8 and rep.passed
    assert rep.points.shape == (8, 2)


def test_residual_shrinks_with_h(log_pair):
    pts = sample_points(log_pair[0], 10, (-2, 2), 1e-3, seed=7)
    coarse = viscosity_audit(*log_pair, points=pts, h=1e-3)
    fine = viscosity_audit(*log_pair, points=pts, h=1e-4)
    common = {tuple(a.x) + (a.t,) for a in coarse.regular} & {tuple(a.x) + (a.t,) for a in fine.regular}
    assert len(common) >= 5
    c = [a.residual for a in coarse.regular if tuple(a.x) + (a.t,) in common]
    f = [a.residual for a in fine.regular if tuple(a.x) + (a.t,) in common]
    assert np.median(c) >= 3 * np.median(f)


def test_sample_points_in_range(log_pair):
    pts = sample_points(log_pair[0], 100, (-2, 2), 1e-3, seed=1)
    assert pts.shape == (100, 2)
    assert np.all((pts[:, 0] > 2e-3) & (pts[:, 0] < 3 - 2e-3))
    assert np.all(np.abs(pts[:, 1]) <= 2)
    assert np.array_equal(pts, sample_points(log_pair[0], 100, (-2, 2), 1e-3, seed=1))
