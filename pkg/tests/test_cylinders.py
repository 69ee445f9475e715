import numpy as np
import pytest

from pathheat.cylinders import (CylinderSpec, LiftedFunctional,
                                consistency_check, cylinder_approx,
                                cylinder_coordinates, eval_cylinder,
                                fd_pathwise_derivs)
from pathheat.errors import DomainError
from pathheat.fourier import fejer_smooth
from pathheat.grids import GridPath, PathPoint, TimeGrid, stop_path
from pathheat.regularization import IntegrandFn

from conftest import make_brownian

ONE = IntegrandFn.constant(1.0).fn


def _identity_spec():
    return CylinderSpec(g=lambda z: float(z[0]), psi=[ONE],
                        gradient=lambda z: np.array([1.0]),
                        hessian=lambda z: np.array([[0.0]]))


class TestEvalCylinder:
    def test_terminal_value_representation(self, grid100):
        x = make_brownian(grid100, seed=4)
        assert eval_cylinder(_identity_spec(), x) == pytest.approx(
            float(x.values[-1, 0]), abs=1e-12)

    def test_constant_g(self, grid100):
        spec = CylinderSpec(g=lambda z: 4.25, psi=[ONE])
        for seed in (1, 2):
            assert eval_cylinder(spec, make_brownian(grid100, seed=seed)) == 4.25

    def test_squared_terminal(self, grid100):
        spec = CylinderSpec(g=lambda z: float(z[0] ** 2), psi=[ONE])
        x = GridPath.from_function(grid100, lambda t: t)
        assert eval_cylinder(spec, x) == pytest.approx(1.0, abs=1e-12)

    def test_coordinates_nonanticipative(self, grid100):
        spec = CylinderSpec(g=lambda z: float(z[0]), psi=[ONE, np.cos])
        x = make_brownian(grid100, seed=7)
        z1 = cylinder_coordinates(spec, 0.6, x)
        z2 = cylinder_coordinates(spec, 0.6, stop_path(x, 0.6))
        assert np.allclose(z1, z2, atol=1e-14)


class TestCylinderApprox:
    def test_terminal_value_exact_every_order(self, grid100):
        xi = lambda x: float(x.values[-1, 0])
        x = make_brownian(grid100, seed=5)
        for n in (0, 3, 9):
            ca = cylinder_approx(xi, n, grid100)
            assert ca.evaluate(x) == pytest.approx(xi(x), abs=1e-10)
            z = cylinder_coordinates(ca.spec, 1.0, x)
            assert ca.spec.g(z) == pytest.approx(xi(x), abs=1e-8)

    def test_constant_functional(self, grid100):
        ca = cylinder_approx(lambda x: -2.0, 4, grid100)
        x = make_brownian(grid100, seed=6)
        assert ca.evaluate(x) == -2.0
        assert ca.spec.g(cylinder_coordinates(ca.spec, 1.0, x)) == -2.0

    def test_g_of_coordinates_equals_smoothed_evaluation(self, grid100):
        xi = lambda x: float(np.max(x.values[:, 0]))
        ca = cylinder_approx(xi, 6, grid100)
        x = make_brownian(grid100, seed=8, start=0.0)
        direct = xi(fejer_smooth(x, 6))
        via_g = ca.spec.g(cylinder_coordinates(ca.spec, 1.0, x))
        assert via_g == pytest.approx(direct, abs=1e-8)

    def test_lipschitz_transfer_for_sup(self):
        grid = TimeGrid(1.0, 2000)
        x = GridPath.from_function(grid, lambda t: np.sin(2 * np.pi * t))
        xi = lambda p: float(np.max(p.values[:, 0]))
        ca = cylinder_approx(xi, 64, grid)
        gap = abs(ca.evaluate(x) - xi(x))
        sup_gap = np.max(np.abs(fejer_smooth(x, 64).values - x.values))
        assert gap <= sup_gap <= 0.05


class TestFdPathwiseDerivs:
    def test_polynomial_lift(self, grid100):
        u = LiftedFunctional(evaluate=lambda t, x, y: float(np.sum(y**2)))
        x = make_brownian(grid100, seed=2)
        d = fd_pathwise_derivs(u, 0.4, x)
        yt = x.value_at(0.4)[0]
        assert d.horizontal == pytest.approx(0.0, abs=1e-8)
        assert d.vertical[0] == pytest.approx(2 * yt, rel=1e-6)
        assert d.vertical2[0, 0] == pytest.approx(2.0, rel=1e-4)

    def test_integral_lift(self, grid100):
        def integral(t, x, y):
            nodes = x.grid.nodes()
            mask = nodes <= t + 1e-12
            vals = x.values[mask, 0]
            inner = np.trapezoid(vals, nodes[mask])
            if t > nodes[mask][-1]:
                inner += (t - nodes[mask][-1]) * x.value_at(t)[0]
            return float(inner)

        u = LiftedFunctional(evaluate=integral)
        x = make_brownian(grid100, seed=3)
        t = 0.5
        d = fd_pathwise_derivs(u, t, x, delta=1e-5)
        assert d.horizontal == pytest.approx(x.value_at(t)[0], abs=1e-4)
        assert np.allclose(d.vertical, 0.0, atol=1e-8)

    def test_constant_lift_all_zero(self, grid100):
        u = LiftedFunctional(evaluate=lambda t, x, y: 3.3)
        d = fd_pathwise_derivs(u, 0.2, make_brownian(grid100, seed=1))
        assert d.horizontal == 0.0
        assert np.allclose(d.vertical, 0.0)
        assert np.allclose(d.vertical2, 0.0)

    def test_horizontal_needs_room(self, grid100):
        u = LiftedFunctional(evaluate=lambda t, x, y: float(y[0]))
        with pytest.raises(DomainError):
            fd_pathwise_derivs(u, 1.0, make_brownian(grid100, seed=1))

    def test_vertical2_symmetric(self, grid100):
        u = LiftedFunctional(
            evaluate=lambda t, x, y: float(y[0] * np.sin(y[1]) + y[1] ** 3))
        x = make_brownian(grid100, seed=9, dimension=2)
        d = fd_pathwise_derivs(u, 0.3, x)
        assert np.allclose(d.vertical2, d.vertical2.T)


class TestConsistency:
    def _samples(self, grid, n=8):
        return [PathPoint(0.1 + 0.1 * i, make_brownian(grid, seed=40 + i))
                for i in range(n)]

    def test_identical_lifts_zero_gap(self, grid100):
        u = LiftedFunctional(evaluate=lambda t, x, y: float(np.sum(y**2)))
        rep = consistency_check(u, u, self._samples(grid100))
        assert rep.precondition_ok
        assert rep.max_derivative_gap() == 0.0

    def test_algebraically_equal_expressions(self, grid100):
        # y^2 written two ways; restrictions coincide, derivatives agree
        u1 = LiftedFunctional(evaluate=lambda t, x, y: float(y[0] ** 2))
        u2 = LiftedFunctional(
            evaluate=lambda t, x, y: float(y[0] * x.value_at(t)[0]
                                           + y[0] * (y[0] - x.value_at(t)[0])))
        rep = consistency_check(u1, u2, self._samples(grid100))
        assert rep.precondition_ok
        # rounding in the rearranged expression is amplified by 1/h^2
        assert rep.max_derivative_gap() < 1e-6

    def test_cubic_perturbation_agrees(self, grid100):
        # adding (y - x(t))^3 changes the lift off the diagonal only, to
        # third order: all derivatives at y = x(t) agree
        u1 = LiftedFunctional(evaluate=lambda t, x, y: float(y[0] ** 2))
        u2 = LiftedFunctional(
            evaluate=lambda t, x, y: float(y[0] ** 2
                                           + (y[0] - x.value_at(t)[0]) ** 3))
        rep = consistency_check(u1, u2, self._samples(grid100))
        assert rep.precondition_ok
        assert rep.max_derivative_gap() < 1e-5

    def test_quadratic_perturbation_flagged(self, grid100):
        # (y - x(t))^2 also vanishes on continuous paths, but its second
        # vertical derivative does not: the check must flag it
        u1 = LiftedFunctional(evaluate=lambda t, x, y: float(y[0] ** 2))
        u2 = LiftedFunctional(
            evaluate=lambda t, x, y: float(y[0] ** 2
                                           + (y[0] - x.value_at(t)[0]) ** 2))
        rep = consistency_check(u1, u2, self._samples(grid100))
        assert rep.precondition_ok
        assert rep.vertical_gap < 1e-6          # first-order verticals agree
        assert rep.vertical2_gap > 1.5          # second-order differ by ~2

    def test_disagreeing_lifts_reported(self, grid100):
        u1 = LiftedFunctional(evaluate=lambda t, x, y: float(y[0]))
        u2 = LiftedFunctional(evaluate=lambda t, x, y: float(y[0]) + 0.1)
        rep = consistency_check(u1, u2, self._samples(grid100))
        assert not rep.precondition_ok
