import math

import numpy as np
import pytest

from pathheat.audit import (derivative_bound_audit,
                            estimate_gauge_quadrature_error, sandwich_audit,
                            validate_alpha)
from pathheat.cylinders import LiftedFunctional, fd_pathwise_derivs
from pathheat.errors import DomainError
from pathheat.gauge import (HORIZONTAL_BOUND, curvature_profile,
                            calibrate_alpha, floored_norm_profile,
                            floored_norm_profile_slope, horizontal_kernel,
                            horizontal_kernel_derivative, horizontal_kernel_mass,
                            horizontal_smoothed_distance, mean_gaussian_norm,
                            mean_gaussian_norm_quadrature, normal_density,
                            perturbation_sum, smooth_gauge,
                            vertical_smoothed_distance)
from pathheat.grids import GridPath, PathPoint, TimeGrid, stopped_sup_distance
from pathheat.quadrature import QuadratureConfig, legendre_rule
from pathheat.sampling import random_lift_points, random_pairs

from conftest import make_brownian


class TestKernelsAndConstants:
    def test_normal_density_values(self):
        assert normal_density(np.zeros((1, 1)))[0] == pytest.approx(
            0.3989422804, abs=1e-9)
        assert normal_density(np.zeros((1, 2)))[0] == pytest.approx(
            0.1591549431, abs=1e-9)

    def test_normal_density_symmetry(self):
        z = np.array([[0.3, -1.2]])
        assert normal_density(z)[0] == normal_density(-z)[0]

    @pytest.mark.parametrize("d,expected", [
        (1, 0.7978845608),
        (2, 1.2533141373),
        (3, 1.5957691216),
    ])
    def test_mean_norm_closed_form(self, d, expected):
        assert mean_gaussian_norm(d) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_mean_norm_matches_quadrature(self, d):
        assert abs(mean_gaussian_norm(d)
                   - mean_gaussian_norm_quadrature(d)) < 1e-6

    def test_time_kernel_zero_at_origin(self):
        assert horizontal_kernel(0.0) == 0.0

    def test_time_kernel_unit_mass(self):
        # smooth after the square-root substitution: Legendre applies
        u, w = legendre_rule(0.0, math.sqrt(40.0), 200)
        total = float(np.sum(w * 2 * u * horizontal_kernel(u * u)))
        assert abs(total - 1.0) < 1e-8
        assert abs(horizontal_kernel_mass(40.0) - total) < 1e-8

    def test_time_kernel_derivative_l1_norm(self):
        # the derivative changes sign once, at s = 1: its L1 norm is 2 eta(1)
        u, w = legendre_rule(0.0, math.sqrt(40.0), 400)
        total = float(np.sum(w * np.abs(2 * u * horizontal_kernel_derivative(u * u))))
        expect = math.sqrt(2.0 / (math.pi * math.e))
        assert abs(total - expect) < 1e-6
        assert expect == pytest.approx(2 * float(horizontal_kernel(1.0)), abs=1e-12)

    def test_negative_argument_rejected(self):
        with pytest.raises(DomainError):
            horizontal_kernel(-0.1)


class TestVerticalSmoothedDistance:
    def test_zero_at_anchor(self, grid64):
        x0 = make_brownian(grid64, seed=1)
        a = PathPoint(0.5, x0)
        sd = vertical_smoothed_distance(a, a.t, x0, a.present_value())
        assert sd.value == pytest.approx(0.0, abs=1e-14)

    def test_monotone_toward_large_jumps(self, grid64):
        z = GridPath.zero(grid64)
        a = PathPoint(0.0, z)
        vals = [vertical_smoothed_distance(a, 0.0, z, np.array([y])).value
                for y in (0.0, 0.5, 1.0, 2.0, 5.0)]
        assert vals[0] == pytest.approx(0.0, abs=1e-14)
        assert all(b > v for v, b in zip(vals, vals[1:]))
        # asymptotically |y| - E|z| (triangle bounds)
        assert vals[-1] == pytest.approx(5.0 - mean_gaussian_norm(1), abs=1e-3)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_two_sided_comparison_every_sample(self, grid64, dim):
        czeta = mean_gaussian_norm(dim)
        for anchor, point in random_pairs(grid64, dim, 60, seed=5):
            v = vertical_smoothed_distance(anchor, point.t, point.path,
                                           point.present_value()).value
            dist = stopped_sup_distance(point, anchor)
            assert v <= dist + 1e-10
            assert v >= dist - czeta - 1e-10    # sharper one-constant offset
            assert v >= dist - 2 * czeta - 1e-10
            assert v >= -1e-10

    def test_gradient_matches_fd_exact_rule(self, grid64):
        for anchor, t, x, y in random_lift_points(grid64, 1, 10, seed=9):
            lift = LiftedFunctional(evaluate=lambda tt, xx, yy, _a=anchor:
                                    vertical_smoothed_distance(_a, tt, xx, yy).value)
            sd = vertical_smoothed_distance(anchor, t, x, y)
            fd = fd_pathwise_derivs(lift, min(t, 1.0 - 0.05), x, y=y)
            assert sd.gradient[0] == pytest.approx(fd.vertical[0], abs=1e-5)
            assert sd.hessian[0, 0] == pytest.approx(fd.vertical2[0, 0], abs=1e-4)

    def test_gauss_hermite_agrees_with_exact_rule(self, grid64):
        gh = QuadratureConfig(z_rule="gauss-hermite", z_nodes=21)
        worst = 0.0
        for anchor, t, x, y in random_lift_points(grid64, 1, 20, seed=3):
            a = vertical_smoothed_distance(anchor, t, x, y).value
            b = vertical_smoothed_distance(anchor, t, x, y, gh).value
            worst = max(worst, abs(a - b))
        assert worst < 0.05   # kinked integrand: GH-21 is a coarse rule

    def test_monte_carlo_rule_agrees(self, grid64):
        mc = QuadratureConfig(z_rule="monte-carlo", z_samples=40_000)
        for anchor, t, x, y in random_lift_points(grid64, 1, 5, seed=4):
            a = vertical_smoothed_distance(anchor, t, x, y).value
            b = vertical_smoothed_distance(anchor, t, x, y, mc).value
            assert abs(a - b) < 0.02


class TestHorizontalSmoothedDistance:
    def test_zero_at_anchor_exactly(self, grid64):
        x0 = make_brownian(grid64, seed=2)
        a = PathPoint(0.4, x0)
        val, derivs = horizontal_smoothed_distance(a, a.t, x0)
        assert val == 0.0
        assert derivs.horizontal == 0.0

    def test_value_saturates_below_one(self, grid64):
        z = GridPath.zero(grid64)
        a = PathPoint(0.0, z)
        big = GridPath.constant(grid64, 50.0)
        val, _ = horizontal_smoothed_distance(a, 0.9, big)
        assert 0.99 < val < 1.0

    def test_sandwich_saturated(self, grid64):
        for anchor, point in random_pairs(grid64, 1, 60, seed=6):
            val, _ = horizontal_smoothed_distance(anchor, point.t, point.path)
            dist = stopped_sup_distance(point, anchor)
            assert val <= min(dist, 1.0) + 1e-10

    def test_time_derivative_matches_fd(self, grid64):
        # fd of the time-smoothed value in t vs the kernel-derivative form
        for anchor, t, x, y in list(random_lift_points(grid64, 1, 6, seed=11)):
            t = min(t, 0.9)
            _, derivs = horizontal_smoothed_distance(anchor, t, x, y)
            h = 1e-5
            from pathheat.grids import stop_path
            frozen = stop_path(x, t)
            vp, _ = horizontal_smoothed_distance(anchor, t + h, frozen, y)
            v0, _ = horizontal_smoothed_distance(anchor, t, x, y)
            fd = (vp - v0) / h
            assert derivs.horizontal == pytest.approx(fd, abs=2e-4)

    def test_horizontal_vanishes_for_past_anchor(self, grid64):
        # once the anchor time is behind t, shifted times see a frozen scene
        x0 = make_brownian(grid64, seed=3)
        anchor = PathPoint(0.2, x0)
        x = make_brownian(grid64, seed=4)
        _, derivs = horizontal_smoothed_distance(anchor, 0.6, x)
        assert derivs.horizontal == pytest.approx(0.0, abs=1e-12)


class TestSmoothGauge:
    def test_diagonal_zero(self, grid64):
        p = PathPoint(0.3, make_brownian(grid64, seed=5))
        assert smooth_gauge(p, p).value == 0.0

    def test_time_separation_quadratic(self, grid64):
        x = make_brownian(grid64, seed=6)
        r = smooth_gauge(PathPoint(0.75, x), PathPoint(0.25, x))
        assert r.time_term == pytest.approx(0.25, abs=1e-12)
        # stopped representatives differ, so the distance term is positive
        assert r.distance_term > 0.0

    def test_horizontal_derivative_bound(self, grid64):
        bound = 2 * 1.0 + HORIZONTAL_BOUND
        for anchor, point in random_pairs(grid64, 1, 40, seed=12):
            r = smooth_gauge(point, anchor)
            assert abs(r.derivs.horizontal) <= bound + 1e-8


class TestPerturbationSum:
    def test_single_anchor_at_anchor(self, grid64):
        p = PathPoint(0.4, make_brownian(grid64, seed=7))
        res = perturbation_sum([p], p)
        assert res.value == 0.0

    def test_repeated_anchor_geometric_sum(self, grid64):
        a = PathPoint(0.3, make_brownian(grid64, seed=8))
        p = PathPoint(0.7, make_brownian(grid64, seed=9))
        base = smooth_gauge(p, a).value
        n = 5
        res = perturbation_sum([a] * n, p)
        expect = base * sum(2.0 ** (-i) for i in range(n))
        assert res.value == pytest.approx(expect, rel=1e-12)
        assert res.tail_bound == pytest.approx(2.0 ** (1 - n) * 2.0, abs=1e-12)

    def test_exact_tail_completion(self, grid64):
        a0 = PathPoint(0.2, make_brownian(grid64, seed=10))
        a1 = PathPoint(0.5, make_brownian(grid64, seed=11))
        p = PathPoint(0.8, make_brownian(grid64, seed=12))
        res = perturbation_sum([a0, a1], p, repeat_last=True)
        expect = smooth_gauge(p, a0).value + smooth_gauge(p, a1).value
        assert res.value == pytest.approx(expect, rel=1e-12)
        assert res.tail_bound == 0.0

    def test_empty_anchor_list(self, grid64):
        with pytest.raises(DomainError):
            perturbation_sum([], PathPoint(0.1, make_brownian(grid64, seed=1)))


class TestProfiles:
    def test_floored_profile_at_zero(self):
        for d in (1, 2, 3):
            assert floored_norm_profile(d, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_slope_is_chi_cdf(self):
        # d=1: P(|Z| <= 1) = 2 Phi(1) - 1
        assert floored_norm_profile_slope(1, 1.0) == pytest.approx(
            0.6826894921, abs=1e-9)
        h = 1e-6
        for d in (1, 2):
            fd = (floored_norm_profile(d, 1.0 + h)
                  - floored_norm_profile(d, 1.0 - h)) / (2 * h)
            assert fd == pytest.approx(floored_norm_profile_slope(d, 1.0), abs=1e-8)

    def test_curvature_profile_at_zero(self):
        for d in (1, 2, 3):
            assert curvature_profile(d, 0.0) == pytest.approx(
                mean_gaussian_norm(d), abs=1e-10)

    def test_curvature_profile_decreasing_to_zero(self):
        grid = np.linspace(0.0, 8.0, 30)
        for d in (1, 2):
            vals = [curvature_profile(d, a) for a in grid]
            assert all(b < a for a, b in zip(vals, vals[1:]))
            assert vals[-1] < 1e-8
            assert all(v > -1e-12 for v in vals)

    def test_second_slope_matches_general_formula(self):
        # curvature of the floored profile at small a follows the radial
        # density, ~ sqrt(2/pi) * a^{d-1} scaling in d = 1
        h = 1e-4
        f2 = (floored_norm_profile_slope(1, h) - floored_norm_profile_slope(1, 0)) / h
        assert f2 == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-3)


class TestAudits:
    def test_bound_audit_passes_d1(self, grid64):
        checks = derivative_bound_audit(1, grid64, 60, seed=1)
        assert all(c.passed for c in checks)

    def test_bound_audit_passes_d2(self, grid64):
        checks = derivative_bound_audit(2, grid64, 40, seed=2)
        assert all(c.passed for c in checks)

    def test_quadrature_error_estimate_small_exact_rule(self, grid64):
        est = estimate_gauge_quadrature_error(1, grid64, QuadratureConfig(),
                                              n_probe=6, seed=3)
        # d=1 z-integrals are closed-form; only the s-rule refines
        assert est["value"] < 1e-6

    def test_sandwich_audit(self, grid64):
        for dim in (1, 2):
            checks = sandwich_audit(dim, grid64, 60, seed=4)
            assert all(c.passed for c in checks), [c.name for c in checks
                                                   if not c.passed]

    def test_calibrated_alpha_validates_on_fresh_samples(self, grid64):
        diag = calibrate_alpha(1, random_pairs(grid64, 1, 300, seed=5), seed=5)
        assert 0.0 < diag.alpha <= 1.0
        checks = validate_alpha(diag, grid64, 300, seed=6)
        assert all(c.passed for c in checks)
        # the one-constant offset also holds empirically
        assert diag.item3_constant <= 1.0 + 1e-9
