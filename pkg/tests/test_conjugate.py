import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopfkit.conjugate import (ConjugateView, affine_segment_probe, biconjugate,
                               constant_duality_check, conjugate_numeric, lower_hull, llt_sorted,
                               subdifferential, view_for)
from hopfkit.errors import (ConfigurationError, DomainError, EvaluationError,
                            PreconditionError)
from hopfkit.problem import catalog_lookup, catalog_names, truncated_quadratic

square = lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1)


def q1(v):
    return np.array([[v]], dtype=float)


def test_numeric_square_is_self_conjugate():
    view = conjugate_numeric(square, 5.0, 4.0, 4001)
    assert view.value(q1(1.0))[0] == pytest.approx(0.5, abs=1e-6)
    assert view.mode == "numeric"


def test_numeric_unit_log_example():
    spec = catalog_lookup("log-example-unit")
    view = view_for(spec, "numeric")
    assert view.value(q1(0.5))[0] == pytest.approx(0.125, abs=1e-6)
    # brute force over a dense grid as oracle
    x = np.linspace(-1, 1, 100001).reshape(-1, 1)
    brute = np.max(0.5 * x[:, 0] - spec.sigma(x))
    h = view.input_spacing
    assert view.value(q1(0.5))[0] == pytest.approx(brute, abs=h * h / 8 + 1e-12)


def test_numeric_linear_sigma_is_indicator():
    spec = catalog_lookup("linear-sigma")
    view = view_for(spec, "numeric")
    assert view.value(q1(2.0))[0] == pytest.approx(0.0, abs=1e-9)
    assert np.isinf(view.value(q1(1.9))[0])


def test_analytic_outside_radius_is_inf(log_pair):
    _, view = log_pair
    assert np.isinf(view.value(q1(4.0 + 1e-6))[0])
    assert np.isfinite(view.value(q1(4.0))[0])


def test_numeric_matches_brute_force_on_random_queries(rng):
    f = lambda x: np.log(np.cosh(x[..., 0]))  # conjugate domain (-1, 1)
    view = conjugate_numeric(f, 8.0, 0.95, 4001)
    x = np.linspace(-8, 8, 4001)
    for q in rng.uniform(-0.9, 0.9, size=20):
        brute = np.max(q * x - np.log(np.cosh(x)))
        assert view.value(q1(q))[0] == pytest.approx(brute, abs=1e-12)


def test_sorted_merge_agrees_with_search(rng):
    x = np.linspace(-3, 3, 301)
    hx, hf, slopes = lower_hull(x, np.abs(x) ** 3 / 3)
    q = np.sort(rng.uniform(slopes[0], slopes[-1], 200))
    k = np.searchsorted(slopes, q, side="left")
    assert llt_sorted(hx, hf, slopes, q) == pytest.approx(q * hx[k] - hf[k])


def test_lower_hull_drops_interior_points():
    x = np.linspace(-1, 1, 5)
    hx, _, slopes = lower_hull(x, np.array([1.0, 2.0, 0.0, 2.0, 1.0]))
    assert hx.tolist() == [-1.0, 0.0, 1.0]
    assert slopes.tolist() == [-1.0, 1.0]


def test_grid_refinement_converges():
    f = lambda x: np.sqrt(1 + x[..., 0] ** 2)
    q = np.linspace(-0.9, 0.9, 37).reshape(-1, 1)
    coarse = conjugate_numeric(f, 6.0, 1.0, 801).value(q)
    fine = conjugate_numeric(f, 6.0, 1.0, 1601).value(q)
    spacing = 12.0 / 800
    assert np.max(np.abs(coarse - fine)) <= spacing * 1.0


def test_numeric_2d_separable_and_brute_force_agree():
    sep = conjugate_numeric(square, 3.0, 2.0, 301, dim=2)
    rot = lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1) + 1e-3 * x[..., 0] * x[..., 1]
    brute = conjugate_numeric(rot, 3.0, 2.0, 151, dim=2)
    q = np.array([[0.5, -0.3], [1.0, 1.0]])
    assert sep.value(q) == pytest.approx(square(q), abs=1e-4)
    assert brute.value(q) == pytest.approx(square(q), abs=5e-3)


def test_numeric_rejects_bad_grids():
    with pytest.raises(ConfigurationError):
        conjugate_numeric(square, 1.0, 1.0, 2)
    with pytest.raises(ConfigurationError):
        conjugate_numeric(square, 1.0, 1.0, 11, dim=3)
    with pytest.raises(EvaluationError):
        conjugate_numeric(lambda x: np.where(x[..., 0] > 0.5, np.inf, 0.0), 1.0, 1.0, 11)


@pytest.mark.parametrize("name", catalog_names())
@pytest.mark.parametrize("mode", ["analytic", "numeric"])
def test_involution(name, mode, rng):
    spec = catalog_lookup(name)
    view = view_for(spec, mode)
    x = rng.uniform(-3, 3, size=(200, 1))
    err = np.abs(biconjugate(view, x, 4001) - spec.sigma(x))
    spacing = 2 * spec.lipschitz_bound / 4000
    assert np.all(err <= 5 * spacing * (1 + np.abs(x[:, 0])))


def test_involution_2d():
    spec = catalog_lookup("log-example", dim=2)
    x = np.array([[0.3, -0.4], [1.5, 0.2]])
    assert biconjugate(view_for(spec), x, 401) == pytest.approx(spec.sigma(x), abs=1e-3)


# subdifferentials


def test_subdifferential_interior_is_gradient():
    _, _, conj, conj_grad = truncated_quadratic(10.0)
    view = ConjugateView.from_callable(conj, 10.0, grad=conj_grad)
    sd = subdifferential(view, 0.7)
    assert sd.is_singleton and sd.points.ravel() == pytest.approx([0.7])


def test_subdifferential_boundary_is_ray(unit_pair):
    _, view = unit_pair
    sd = subdifferential(view, 1.0, window=10.0)
    assert sd.unbounded and sd.unbounded_upper[0] and not sd.unbounded_lower[0]
    assert (sd.lower[0], sd.upper[0]) == pytest.approx((1.0, 10.0))
    assert sd.contains([5.0]) and not sd.contains([0.5])


def test_subdifferential_numeric_boundary_uses_quotients(unit_pair):
    spec, _ = unit_pair
    view = view_for(spec, "numeric")
    sd = subdifferential(view, -1.0, tol=1e-4)
    assert sd.unbounded_lower[0] and sd.upper[0] == pytest.approx(-1.0, abs=1e-3)


def test_subdifferential_of_indicator_is_whole_window(linear_pair):
    _, view = linear_pair
    sd = subdifferential(view, 2.0, window=7.0)
    assert (sd.lower[0], sd.upper[0]) == (-7.0, 7.0)
    assert sd.unbounded_lower[0] and sd.unbounded_upper[0]


def test_subdifferential_outside_domain(unit_pair, linear_pair):
    with pytest.raises(DomainError):
        subdifferential(unit_pair[1], 1.5)
    with pytest.raises(DomainError):
        subdifferential(linear_pair[1], 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_subdifferential_monotone(a, b):
    # conjugate of sqrt(1 + x^2), no analytic gradient: one-sided quotients only
    view = ConjugateView.from_callable(lambda q: -np.sqrt(np.clip(1 - q[..., 0] ** 2, 0, None)),
                                       1.0)
    lo, hi = sorted((a, b))
    s1, s2 = subdifferential(view, lo, tol=1e-7), subdifferential(view, hi, tol=1e-7)
    assert s1.lower[0] <= s2.lower[0] + 1e-9 and s1.upper[0] <= s2.upper[0] + 1e-9
    if hi - lo > 1e-3:
        assert s1.upper[0] <= s2.lower[0]


@settings(max_examples=40, deadline=None)
@given(st.floats(-3.9, 3.9), st.floats(-3.9, 3.9))
def test_subgradient_inequality(p, p0):
    _, _, conj, conj_grad = truncated_quadratic(4.0)
    view = ConjugateView.from_callable(conj, 4.0, grad=conj_grad)
    y = subdifferential(view, p0).points[0]
    lhs = view.value(q1(p))[0] - view.value(q1(p0))[0]
    assert lhs >= y[0] * (p - p0) - 1e-9


# affine segments


def test_strictly_convex_has_no_affine_segment():
    _, _, conj, conj_grad = truncated_quadratic(4.0)
    view = ConjugateView.from_callable(conj, 4.0, grad=conj_grad)
    assert not affine_segment_probe(view, 1.0, 0.0, 0.0)


def test_abs_is_affine_on_positive_segment():
    view = ConjugateView.from_callable(lambda q: np.abs(q[..., 0]), 5.0)
    probe = affine_segment_probe(view, 0.8, 0.2, 1.0)
    assert probe and not probe.inconsistent


def test_degenerate_segment_is_affine():
    view = ConjugateView.from_callable(lambda q: q[..., 0] ** 2, 5.0)
    assert affine_segment_probe(view, 0.3, 0.3, 0.6)


def test_inconsistency_is_flagged():
    # endpoints agree with slope 1 but the middle bulges below the chord
    v = lambda q: np.where(np.abs(q[..., 0] - 0.5) < 0.25, q[..., 0] - 0.1, q[..., 0])
    view = ConjugateView.from_callable(v, 5.0)
    probe = affine_segment_probe(view, 0.9, 0.1, 1.0)
    assert probe.affine and probe.inconsistent


def test_non_subgradient_is_rejected():
    view = ConjugateView.from_callable(lambda q: q[..., 0] ** 2, 5.0)
    with pytest.raises(PreconditionError):
        affine_segment_probe(view, 1.0, 0.0, 3.0)


# duality of constants


def test_duality_log_example(log_pair, unit_pair):
    rep = constant_duality_check(*unit_pair)
    assert rep.passed and rep.worst_margin >= -1e-9
    assert constant_duality_check(*log_pair).passed


def test_duality_quarter_square():
    sigma, grad, _, _ = truncated_quadratic(6.0, curvature=0.5)
    spec = catalog_lookup("zero-h").replace(initial=sigma, initial_grad=grad, conjugate=None,
                                            conjugate_grad=None, lipschitz_bound=6.0,
                                            semiconcavity=0.5)
    rep = constant_duality_check(spec, view_for(spec))
    assert rep.passed


def test_duality_detects_wrong_constant(log_pair):
    spec, view = log_pair
    rep = constant_duality_check(spec.replace(semiconcavity=0.5), view)
    assert not rep.passed


def test_duality_coincident_pair_has_zero_margin(log_pair):
    spec, view = log_pair
    rep = constant_duality_check(spec, view, pairs=1)
    assert rep.worst_margin == 0.0


def test_duality_numeric_tolerance_scales_with_grid(sqrt_pair):
    spec, _ = sqrt_pair
    assert constant_duality_check(spec, view_for(spec, "numeric")).passed


def test_duality_needs_constant(linear_pair):
    with pytest.raises(ConfigurationError):
        constant_duality_check(*linear_pair)
