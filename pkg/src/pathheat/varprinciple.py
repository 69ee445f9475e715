"""Constructive smooth variational principle on a finite set of path points.

Given an objective G on a finite search space and a starting point whose
value is within eps of the supremum, the iteration repeatedly subtracts
geometrically weighted gauge terms anchored at the running maximizers and
re-maximizes.  On a finite space the exact argmax makes every step either
strictly increase the perturbed value or halt, so the anchor sequence is
eventually constant and all conclusions (anchor proximity, value gain, and
strict maximality of the perturbed objective) can be checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, InputError
from .gauge import QuadratureConfig, smooth_gauge, perturbation_sum, PerturbationResult
from .grids import PathPoint, path_distance

__all__ = ["SearchSpace", "VPResult", "smooth_variational_principle",
           "verify_gauge_axioms", "GaugeAxiomRow"]

MAX_ITERATIONS = 1000
STRICTNESS_FLOOR = 1e-12


@dataclass(frozen=True)
class SearchSpace:
    """Finite list of path points on one grid, deduplicated under the
    pseudometric (points at zero distance are interchangeable)."""

    points: tuple[PathPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise DomainError("search space must be nonempty")
        grid = self.points[0].path.grid
        for p in self.points:
            if p.path.grid != grid:
                raise DomainError("all search-space points must share a grid")
        kept: list[PathPoint] = []
        for p in self.points:
            if all(path_distance(p, q) > 0.0 for q in kept):
                kept.append(p)
        object.__setattr__(self, "points", tuple(kept))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass
class ItemRecord:
    """Per-anchor record for the proximity conclusion, in both argument orders."""

    index: int
    gauge_limit_to_anchor: float
    gauge_anchor_to_limit: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.gauge_limit_to_anchor <= self.bound + 1e-12

    @property
    def ok_reversed(self) -> bool:
        return self.gauge_anchor_to_limit <= self.bound + 1e-12


@dataclass
class VPResult:
    anchors: list[PathPoint]
    anchor_indices: list[int]
    limit: PathPoint
    limit_index: int
    eps: float
    delta: float
    iterations: int
    item_i: list[ItemRecord]
    item_ii_lhs: float
    item_ii_rhs: float
    item_iii_margin: float
    perturbation: Callable[[PathPoint], PerturbationResult] = field(repr=False)

    @property
    def item_i_ok(self) -> bool:
        return all(r.ok for r in self.item_i)

    @property
    def item_ii_ok(self) -> bool:
        return self.item_ii_lhs <= self.item_ii_rhs + 1e-12

    @property
    def item_iii_ok(self) -> bool:
        return self.item_iii_margin > STRICTNESS_FLOOR

    def all_items_ok(self) -> bool:
        return self.item_i_ok and self.item_ii_ok and self.item_iii_ok


def smooth_variational_principle(G: Callable[[PathPoint], float], eps: float,
                                 delta: float, start: PathPoint,
                                 space: SearchSpace,
                                 config: QuadratureConfig = QuadratureConfig()
                                 ) -> VPResult:
    """Perturbed maximization with smooth gauge terms on a finite space.

    Requires G(start) >= sup G - eps over the space.  Anchor weights follow
    the geometric schedule delta / 2^n.  Ties in the argmax are broken by
    the lowest index for determinism.
    """
    if eps <= 0 or delta <= 0:
        raise DomainError("eps and delta must be positive")
    pts = list(space.points)
    values = np.array([float(G(p)) for p in pts])
    start_idx = _index_of(space, start)
    sup = float(np.max(values))
    if values[start_idx] < sup - eps - 1e-12:
        raise InputError(
            f"start value {values[start_idx]:.6g} below sup - eps = {sup - eps:.6g}")

    # gauge columns: gauge(p, anchor) for every p in the space, per anchor
    def gauge_column(anchor_idx: int) -> np.ndarray:
        a = pts[anchor_idx]
        return np.array([smooth_gauge(p, a, config).value for p in pts])

    anchor_indices = [start_idx]
    columns = [gauge_column(start_idx)]
    perturbed = values - delta * columns[0]
    current = start_idx
    iterations = 0
    while True:
        iterations += 1
        if iterations > MAX_ITERATIONS:
            raise ConvergenceError(f"no fixed point after {MAX_ITERATIONS} steps")
        nxt = int(np.argmax(perturbed))
        if nxt == current and iterations > 1:
            break
        if nxt == current and len(anchor_indices) == 1 and iterations == 1:
            # start is already the perturbed maximizer
            break
        current = nxt
        anchor_indices.append(current)
        col = gauge_column(current)
        columns.append(col)
        perturbed = perturbed - delta * 2.0 ** (-(len(anchor_indices) - 1)) * col

    limit_idx = current
    limit = pts[limit_idx]
    anchors = [pts[i] for i in anchor_indices]

    def perturbation(p: PathPoint) -> PerturbationResult:
        return perturbation_sum(anchors, p, config, repeat_last=True)

    # exact geometric completion: the final anchor repeats forever
    weights = [2.0 ** (-i) for i in range(len(anchors))]
    weights[-1] *= 2.0
    phi_vals = np.zeros(len(pts))
    for w, col in zip(weights, columns):
        phi_vals += w * col

    item_i = []
    for i, idx in enumerate(anchor_indices):
        fwd = smooth_gauge(limit, pts[idx], config).value
        rev = smooth_gauge(pts[idx], limit, config).value
        item_i.append(ItemRecord(index=i, gauge_limit_to_anchor=fwd,
                                 gauge_anchor_to_limit=rev,
                                 bound=eps / (2.0 ** i * delta)))

    item_ii_lhs = float(values[start_idx])
    item_ii_rhs = float(values[limit_idx] - delta * phi_vals[limit_idx])

    score = values - delta * phi_vals
    others = np.delete(score, limit_idx)
    margin = float(score[limit_idx] - np.max(others)) if others.size else np.inf

    return VPResult(anchors=anchors, anchor_indices=anchor_indices, limit=limit,
                    limit_index=limit_idx, eps=eps, delta=delta,
                    iterations=iterations, item_i=item_i,
                    item_ii_lhs=item_ii_lhs, item_ii_rhs=item_ii_rhs,
                    item_iii_margin=margin, perturbation=perturbation)


def _index_of(space: SearchSpace, p: PathPoint) -> int:
    for i, q in enumerate(space.points):
        if path_distance(p, q) == 0.0:
            return i
    raise InputError("start point is not in the search space")


@dataclass
class GaugeAxiomRow:
    eps: float
    eta: float
    violating_pairs: int

    @property
    def ok(self) -> bool:
        return self.eta > 0.0


def verify_gauge_axioms(space: SearchSpace,
                        config: QuadratureConfig = QuadratureConfig(),
                        eps_grid: Sequence[float] = (0.5, 0.2, 0.1)
                        ) -> list[GaugeAxiomRow]:
    """Largest eta per eps with: gauge <= eta implies pseudometric < eps.

    Scans all ordered pairs of the space (the gauge is not symmetric).  A row
    with eta <= 0 means some pair at pseudometric distance >= eps has zero
    gauge, which would break the axiom on this space.
    """
    pts = space.points
    n = len(pts)
    gauge = np.zeros((n, n))
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            gauge[i, j] = smooth_gauge(pts[i], pts[j], config).value
            dist[i, j] = path_distance(pts[i], pts[j])
    rows = []
    for eps in eps_grid:
        mask = dist >= eps
        count = int(np.sum(mask))
        if count == 0:
            eta = float(np.max(gauge)) + 1.0  # no pair can violate
        else:
            eta = float(np.min(gauge[mask]))
        rows.append(GaugeAxiomRow(eps=eps, eta=eta, violating_pairs=count))
    return rows
