"""Orchestrated experiments: the comparison-theorem desk pipeline and
convergence sweeps.

The comparison pipeline exercises, on a finite search space, the machinery
that proves uniqueness: cylindrical smoothing of the terminal condition,
exponential scaling, perturbed maximization with the smooth gauge, and the
bounded-operator estimate of the perturbation at the limit point.  The run
reports the inequality chain

    lambda G(p0)  <=  lambda (G(limit) - delta phi(limit))  <=  delta L phi(limit)

whose left link is exact by construction and whose right link applies when
the limit time is interior; a limit at the terminal time is the structural
escape branch and is reported as such, consistent with the theory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cylinders import cylinder_approx, cylinder_coordinates
from .errors import InputError
from .fourier import fejer_coefficient, fejer_coefficient_quadrature, fejer_smooth
from .gauge import (HORIZONTAL_BOUND, SATURATED_HESS_BOUND, perturbation_bounds)
from .grids import GridPath, PathPoint, TimeGrid
from .ito import SEMIMARTINGALE_PRESETS, ito_verify
from .quadrature import QuadratureConfig
from .sampling import random_path
from .solver import (MCConfig, build_terminal, candidate_solution,
                     finite_dim_solution)
from .streams import substream
from .varprinciple import SearchSpace, smooth_variational_principle

__all__ = [
    "ComparisonReport",
    "DeltaRow",
    "comparison_demo",
    "brownian_search_space",
    "tn_convergence_rows",
    "mc_convergence_rows",
    "dt_convergence_rows",
]

_SPACE_STREAM = 21


def brownian_search_space(grid: TimeGrid, n_paths: int, seed: int,
                          times: Optional[list[float]] = None,
                          amplitude: float = 1.0) -> SearchSpace:
    """Search space of scaled Brownian paths pinned at zero, with point times
    drawn from ``times`` (default: quarter nodes of the horizon)."""
    rng = substream(seed, _SPACE_STREAM, 0)
    if times is None:
        times = [0.25 * grid.horizon, 0.5 * grid.horizon, 0.75 * grid.horizon]
    pts = []
    for i in range(n_paths):
        dw = rng.standard_normal((grid.steps, 1)) * math.sqrt(grid.dt)
        vals = np.vstack([np.zeros((1, 1)), np.cumsum(dw, axis=0)]) * amplitude
        t = times[i % len(times)]
        pts.append(PathPoint(t, GridPath(grid, vals)))
    return SearchSpace(tuple(pts))


_FINITE_SPACE_CAVEAT = (
    "the tangency link is guaranteed only at a global maximum over the whole "
    "path space; on a finite space it is reported, not asserted")


@dataclass
class DeltaRow:
    delta: float
    limit_time: float
    interior: bool
    chain_left: float
    chain_mid: float
    chain_right: float
    phi_at_limit: float
    operator_phi: float
    operator_bound: float
    items_ok: bool
    exact_link_ok: bool
    operator_ok: bool
    tangency_link_ok: Optional[bool]
    endpoint_ok: bool
    iterations: int

    @property
    def machinery_ok(self) -> bool:
        return self.items_ok and self.exact_link_ok and self.operator_ok


@dataclass
class ComparisonReport:
    """Per-delta chain values plus the machinery verdict.

    "consistent" certifies everything the theory guarantees at desk scale:
    the perturbed-maximization conclusions, the exact left link of the chain,
    and the uniform operator bound on the perturbation.  In subsolution mode
    the endpoint inequality (left <= right) is also required: a strict
    subsolution must survive the vanishing-delta estimate.  In candidate
    mode the endpoint's failure at small delta together with a positive
    start gap is the contradiction mechanism itself and is reported as
    ``contradiction_exhibited``.
    """

    mode: str
    lam: float
    eps: float
    order: int
    coordinates: int
    n_points: int
    start_value: float
    sup_value: float
    stat_allowance: float
    rows: list[DeltaRow] = field(default_factory=list)
    caveat: str = _FINITE_SPACE_CAVEAT

    @property
    def verdict(self) -> str:
        for row in self.rows:
            if not row.machinery_ok:
                return "violated"
            if self.mode == "subsolution" and not row.endpoint_ok:
                return "violated"
        return "consistent"

    @property
    def rhs_monotone(self) -> bool:
        rhs = [row.chain_right for row in self.rows]
        return all(b < a for a, b in zip(rhs, rhs[1:]))

    @property
    def contradiction_exhibited(self) -> bool:
        last = self.rows[-1]
        return (self.mode == "candidate"
                and self.start_value > self.stat_allowance
                and not last.endpoint_ok)


def comparison_demo(grid: TimeGrid, seed: int,
                    terminal: str = "running_max",
                    order: int = 16,
                    n_paths: int = 200,
                    n_mc: int = 2000,
                    lam: float = 0.5,
                    deltas: tuple[float, ...] = (0.1, 0.05, 0.025),
                    mode: str = "candidate",
                    offset: float = 0.25,
                    z_samples: int = 4096,
                    start_index: int = 0,
                    gauge_config: QuadratureConfig = QuadratureConfig(),
                    progress: Optional[Callable[[str], None]] = None
                    ) -> ComparisonReport:
    """Run the comparison machinery end to end on a finite space.

    ``mode`` "candidate" takes the rough side u to be the Monte-Carlo
    solution itself (the machinery should then report no contradiction);
    "subsolution" takes u = solution - offset, a strict subsolution.
    """
    if mode not in ("candidate", "subsolution"):
        raise InputError("mode must be 'candidate' or 'subsolution'")
    say = progress or (lambda s: None)
    xi = build_terminal(terminal, grid)

    # Step I: cylindrical smoothing of the terminal condition.
    approx = cylinder_approx(xi.fn, order, grid, dimension=1, xi_batch=xi.batch)
    spec_n = approx.spec
    n_coords = 2 * order + 1
    factor_config = QuadratureConfig(z_rule="monte-carlo", z_samples=z_samples,
                                     z_seed=seed + 17)

    space = brownian_search_space(grid, n_paths, seed)
    pts = list(space.points)
    say(f"space of {len(pts)} points; smoothing order {order} "
        f"({n_coords} coordinates)")

    # Step II: exponential scaling of both sides.
    u_vals = np.empty(len(pts))
    u_err = np.empty(len(pts))
    vn_vals = np.empty(len(pts))
    vn_err = np.empty(len(pts))
    for i, p in enumerate(pts):
        est = candidate_solution(xi, p.t, p.path,
                                 MCConfig(n_samples=n_mc, seed=seed + 101 + i))
        u_vals[i] = est.mean
        u_err[i] = est.stderr
        z = cylinder_coordinates(spec_n, p.t, p.path)
        sol = finite_dim_solution(spec_n, p.t, z, factor_config,
                                  derivatives=False, horizon=grid.horizon)
        vn_vals[i] = sol.value
        vn_err[i] = sol.value_stderr
    if mode == "subsolution":
        u_vals = u_vals - offset
    scale = np.exp(lam * np.array([p.t for p in pts]))
    g_vals = scale * (u_vals - vn_vals)
    say("solution values estimated on the space")

    gmap = {id(p): g_vals[i] for i, p in enumerate(pts)}

    def G(p: PathPoint) -> float:
        return gmap[id(p)]

    sup_g = float(np.max(g_vals))
    start = pts[start_index]
    eps = max(sup_g - g_vals[start_index], 1e-9) * (1.0 + 1e-9) + 1e-12
    stat = float(lam * 3.0 * np.max(scale * (u_err + vn_err)))
    bounds = perturbation_bounds(grid.horizon)
    op_bound = bounds["horizontal"] + 0.5 * bounds["vertical2"]

    report = ComparisonReport(mode=mode, lam=lam, eps=eps, order=order,
                              coordinates=n_coords, n_points=len(pts),
                              start_value=float(g_vals[start_index]),
                              sup_value=sup_g, stat_allowance=stat)

    # Steps III-V per delta.
    for delta in deltas:
        res = smooth_variational_principle(G, eps, delta, start, space,
                                           gauge_config)
        pert = res.perturbation(res.limit)
        lphi = pert.derivs.heat_operator()
        interior = bool(res.limit.t < grid.horizon - 1e-12)
        chain_left = lam * float(g_vals[start_index])
        chain_mid = lam * float(gmap[id(res.limit)] - delta * pert.value)
        chain_right = delta * lphi
        tangency = bool(chain_mid <= chain_right + stat) if interior else None
        report.rows.append(DeltaRow(
            delta=delta, limit_time=res.limit.t, interior=interior,
            chain_left=chain_left, chain_mid=chain_mid, chain_right=chain_right,
            phi_at_limit=pert.value, operator_phi=lphi, operator_bound=op_bound,
            items_ok=bool(res.all_items_ok()),
            exact_link_ok=bool(chain_left <= chain_mid + 1e-9),
            operator_ok=bool(abs(lphi) <= op_bound + 1e-6),
            tangency_link_ok=tangency,
            endpoint_ok=bool(chain_left <= chain_right + stat),
            iterations=res.iterations))
        say(f"delta={delta:g}: limit at t={res.limit.t:g}, "
            f"chain=({chain_left:.4g}, {chain_mid:.4g}, {chain_right:.4g})")
    return report


# ---------------------------------------------------------------------------
# Convergence sweeps
# ---------------------------------------------------------------------------

def tn_convergence_rows(grid: TimeGrid, orders=(4, 8, 16, 32, 64, 128)):
    """Fejer reconstruction error on the unit sine path, per order."""
    x = GridPath.from_function(grid, lambda t: np.sin(2 * np.pi * t / grid.horizon))
    rows = []
    for n in orders:
        err = float(np.max(np.abs(fejer_smooth(x, n).values - x.values)))
        cf = float(np.abs(fejer_coefficient(x, 1)
                          - fejer_coefficient_quadrature(x, 1))[0])
        rows.append({"order": n, "sup_error": err, "coefficient_gap": cf})
    return rows


def mc_convergence_rows(grid: TimeGrid, seed: int, terminal: str = "running_max",
                        sizes=(1000, 10_000, 100_000)):
    xi = build_terminal(terminal, grid)
    x = GridPath.zero(grid)
    rows = []
    for n in sizes:
        est = candidate_solution(xi, 0.0, x, MCConfig(n_samples=n, seed=seed))
        rows.append({"n_samples": n, "mean": est.mean, "stderr": est.stderr})
    return rows


def dt_convergence_rows(horizon: float, seed: int, n_samples: int = 256,
                        exponents=(6, 7, 8, 9, 10), preset: str = "brownian"):
    """Terminal residual of the pathwise formula for the square lift across
    grid resolutions, with the fitted log-log slope in each row."""
    from .cylinders import LiftedFunctional  # local: avoids an import cycle

    lift = LiftedFunctional(
        evaluate=lambda t, x, y: float(np.sum(np.atleast_1d(y) ** 2)),
        horizontal=lambda t, x: 0.0,
        vertical=lambda t, x, y: 2.0 * np.atleast_1d(y),
        vertical2=lambda t, x, y: 2.0 * np.eye(np.atleast_1d(y).size),
        name="square")

    def profiles(path: GridPath):
        v = path.values
        m1 = v.shape[0]
        u = np.sum(v * v, axis=1)
        h = np.zeros(m1)
        v1 = 2.0 * v
        v2 = np.broadcast_to(2.0 * np.eye(v.shape[1]), (m1, v.shape[1], v.shape[1]))
        return u, h, v1, v2

    spec = SEMIMARTINGALE_PRESETS[preset]()
    rows = []
    dts, errs = [], []
    for e in exponents:
        grid = TimeGrid(horizon, 2**e)
        rep = ito_verify(lift, spec, grid, MCConfig(n_samples=n_samples, seed=seed),
                         bracket="model", profiles=profiles)
        dts.append(grid.dt)
        errs.append(rep.residual_terminal.mean)
        rows.append({"dt": grid.dt, "mean_abs_residual": rep.residual_terminal.mean,
                     "stderr": rep.residual_terminal.stderr})
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    for row in rows:
        row["slope"] = slope
    return rows
