"""Randomized audits of the gauge machinery: uniform derivative bounds,
two-sided distance comparisons, and validation of the calibrated
lower-bound constant on fresh samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gauge import (HORIZONTAL_BOUND, SATURATED_GRAD_BOUND,
                    SATURATED_HESS_BOUND, VERTICAL_GRAD_BOUND,
                    VERTICAL_HESS_BOUND, GaugeDiagnostics,
                    horizontal_smoothed_distance, mean_gaussian_norm,
                    perturbation_bounds, perturbation_sum,
                    vertical_smoothed_distance)
from .grids import GridPath, PathPoint, TimeGrid, stopped_sup_distance
from .quadrature import QuadratureConfig
from .sampling import random_lift_points, random_pairs

__all__ = ["BoundCheck", "estimate_gauge_quadrature_error",
           "derivative_bound_audit", "sandwich_audit", "validate_alpha"]


@dataclass
class BoundCheck:
    name: str
    bound: float
    observed: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.observed <= self.bound + self.tolerance

    def csv_row(self) -> list:
        return [self.name, f"{self.bound:.12g}", f"{self.observed:.12g}",
                f"{self.tolerance:.3g}", "pass" if self.passed else "FAIL"]


def estimate_gauge_quadrature_error(dimension: int, grid: TimeGrid,
                                    config: QuadratureConfig,
                                    n_probe: int = 16, seed: int = 5) -> dict:
    """Refinement-based error estimate for the smoothed-distance outputs.

    Compares the configured rule against its refinement on probe tuples and
    returns the largest discrepancy per output family, inflated by a safety
    factor of 2; this feeds the tolerance of the bound audits.
    """
    fine = config.refined()
    out = {"value": 0.0, "horizontal": 0.0, "vertical": 0.0, "vertical2": 0.0}
    for anchor, t, x, y in random_lift_points(grid, dimension, n_probe, seed):
        v0, d0 = horizontal_smoothed_distance(anchor, t, x, y, config)
        v1, d1 = horizontal_smoothed_distance(anchor, t, x, y, fine)
        out["value"] = max(out["value"], abs(v0 - v1))
        out["horizontal"] = max(out["horizontal"], abs(d0.horizontal - d1.horizontal))
        out["vertical"] = max(out["vertical"],
                              float(np.max(np.abs(d0.vertical - d1.vertical))))
        out["vertical2"] = max(out["vertical2"],
                               float(np.max(np.abs(d0.vertical2 - d1.vertical2))))
    return {k: 2.0 * v for k, v in out.items()}


def derivative_bound_audit(dimension: int, grid: TimeGrid, n_tuples: int,
                           seed: int, config: QuadratureConfig = QuadratureConfig(),
                           tol: float = 1e-6, quad_error: dict | None = None,
                           n_anchors: int = 3) -> list[BoundCheck]:
    """Observed maxima of all smoothing-stage derivatives vs their constants.

    Audits, over random (anchor, t, x, y) tuples: the mollified distance
    (gradient, Hessian), its time-smoothed saturation (all three derivative
    families), and the anchored perturbation sum with ``n_anchors`` anchors.
    Tolerances are ``tol`` plus the refinement-based quadrature error.
    """
    if quad_error is None:
        quad_error = estimate_gauge_quadrature_error(dimension, grid, config,
                                                     seed=seed + 1)
    tuples = list(random_lift_points(grid, dimension, n_tuples, seed))
    anchors = [a for a, _, _, _ in tuples[:n_anchors]]
    pb = perturbation_bounds(grid.horizon)

    obs = {k: 0.0 for k in ("dist_grad", "dist_hess", "sat_horizontal",
                            "sat_grad", "sat_hess", "pert_horizontal",
                            "pert_grad", "pert_hess")}
    for anchor, t, x, y in tuples:
        sd = vertical_smoothed_distance(anchor, t, x, y, config)
        obs["dist_grad"] = max(obs["dist_grad"], float(np.max(np.abs(sd.gradient))))
        obs["dist_hess"] = max(obs["dist_hess"], float(np.max(np.abs(sd.hessian))))
        _, derivs = horizontal_smoothed_distance(anchor, t, x, y, config)
        obs["sat_horizontal"] = max(obs["sat_horizontal"], abs(derivs.horizontal))
        obs["sat_grad"] = max(obs["sat_grad"], float(np.max(np.abs(derivs.vertical))))
        obs["sat_hess"] = max(obs["sat_hess"], float(np.max(np.abs(derivs.vertical2))))
        pert = perturbation_sum(anchors, PathPoint(t, x), config, repeat_last=True)
        obs["pert_horizontal"] = max(obs["pert_horizontal"],
                                     abs(pert.derivs.horizontal))
        obs["pert_grad"] = max(obs["pert_grad"],
                               float(np.max(np.abs(pert.derivs.vertical))))
        obs["pert_hess"] = max(obs["pert_hess"],
                               float(np.max(np.abs(pert.derivs.vertical2))))

    qe = quad_error
    return [
        BoundCheck("distance_gradient", VERTICAL_GRAD_BOUND, obs["dist_grad"],
                   tol + qe["vertical"]),
        BoundCheck("distance_hessian", VERTICAL_HESS_BOUND, obs["dist_hess"],
                   tol + qe["vertical2"]),
        BoundCheck("saturated_horizontal", HORIZONTAL_BOUND, obs["sat_horizontal"],
                   tol + qe["horizontal"]),
        BoundCheck("saturated_gradient", SATURATED_GRAD_BOUND, obs["sat_grad"],
                   tol + qe["vertical"]),
        BoundCheck("saturated_hessian", SATURATED_HESS_BOUND, obs["sat_hess"],
                   tol + qe["vertical2"]),
        BoundCheck("perturbation_horizontal", pb["horizontal"],
                   obs["pert_horizontal"], tol + 2 * qe["horizontal"]),
        BoundCheck("perturbation_gradient", pb["vertical"], obs["pert_grad"],
                   tol + 2 * qe["vertical"]),
        BoundCheck("perturbation_hessian", pb["vertical2"], obs["pert_hess"],
                   tol + 2 * qe["vertical2"]),
    ]


def sandwich_audit(dimension: int, grid: TimeGrid, n_samples: int, seed: int,
                   config: QuadratureConfig = QuadratureConfig(),
                   alpha: GaugeDiagnostics | None = None,
                   tol: float = 1e-9) -> list[BoundCheck]:
    """Two-sided comparisons of the smoothed distances with the raw stopped
    distance D at every sample.

    Upper sides and nonnegativity hold exactly at the rule level (symmetric
    nodes, positive weights, same-rule |z| subtraction), so the tolerance is
    a pure rounding allowance.  Both lower offsets are audited: the provable
    two-constant one and the sharper one-constant version, which the
    symmetrization argument also yields for the subtracted definition.
    The optional calibrated constant is validated on these (fresh) samples.
    """
    czeta = mean_gaussian_norm(dimension)
    worst = {k: -np.inf for k in ("upper", "lower2", "lower1", "neg",
                                  "sat_upper", "alpha", "alpha_sat")}
    for anchor, point in random_pairs(grid, dimension, n_samples, seed):
        val = vertical_smoothed_distance(anchor, point.t, point.path,
                                         point.present_value(), config).value
        dist = stopped_sup_distance(point, anchor)
        sat, _ = horizontal_smoothed_distance(anchor, point.t, point.path,
                                              point.present_value(), config)
        worst["upper"] = max(worst["upper"], val - dist)
        worst["lower2"] = max(worst["lower2"], (dist - 2 * czeta) - val)
        worst["lower1"] = max(worst["lower1"], (dist - czeta) - val)
        worst["neg"] = max(worst["neg"], -val)
        worst["sat_upper"] = max(worst["sat_upper"], sat - min(dist, 1.0))
        if alpha is not None:
            d = dimension
            floor = alpha.alpha * min(dist ** (d + 1), dist)
            worst["alpha"] = max(worst["alpha"], floor - val)
            worst["alpha_sat"] = max(worst["alpha_sat"],
                                     floor / (1.0 + dist) - sat)
    checks = [
        BoundCheck("distance_upper", 0.0, worst["upper"], tol),
        BoundCheck("distance_lower_two_constants", 0.0, worst["lower2"], tol),
        BoundCheck("distance_lower_one_constant", 0.0, worst["lower1"], tol),
        BoundCheck("distance_nonnegative", 0.0, worst["neg"], tol),
        BoundCheck("saturated_upper", 0.0, worst["sat_upper"], tol),
    ]
    if alpha is not None:
        checks.append(BoundCheck("calibrated_lower", 0.0, worst["alpha"], tol))
        checks.append(BoundCheck("calibrated_lower_saturated", 0.0,
                                 worst["alpha_sat"], tol))
    return checks


def validate_alpha(diag: GaugeDiagnostics, grid: TimeGrid, n_samples: int,
                   seed: int, config: QuadratureConfig = QuadratureConfig()
                   ) -> list[BoundCheck]:
    """Run the calibrated lower bounds against a fresh sample set."""
    return [c for c in sandwich_audit(diag.dimension, grid, n_samples, seed,
                                      config, alpha=diag)
            if c.name.startswith("calibrated")]
