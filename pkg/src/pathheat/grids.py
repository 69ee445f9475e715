"""Paths on a uniform time grid, the stopped-path pseudometric, and
Brownian / semimartingale simulation.

A path is stored by its values at the nodes of a uniform grid on [0, T] and
is understood as the piecewise-linear interpolant between nodes.  Sup-norms
of such paths are exact maxima over nodes (the Euclidean norm is convex
along a segment), and stopping at a node is an exact operation.  Times fed
to stopped-path operations are snapped to the nearest node so that equality
of stopped representatives is decidable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericError
from .streams import sample_stream

__all__ = [
    "TimeGrid",
    "GridPath",
    "PathPoint",
    "SemimartingaleSpec",
    "stop_path",
    "path_distance",
    "brownian_extension",
    "extend_with_increments",
    "brownian_increments",
    "simulate_semimartingale",
    "simulate_semimartingale_ensemble",
    "write_path_csv",
    "read_path_csv",
]

_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with M steps (M+1 nodes)."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def node(self, k: int) -> float:
        return k * self.horizon / self.steps

    def index_of(self, t: float) -> int:
        """Nearest node index for ``t``; raises if t is outside [0, T]."""
        if not (-_SNAP_TOL * self.horizon <= t <= self.horizon * (1 + _SNAP_TOL)):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        k = int(round(t / self.dt))
        return min(max(k, 0), self.steps)

    def snap(self, t: float) -> float:
        return self.node(self.index_of(t))


@dataclass(frozen=True)
class GridPath:
    """Piecewise-linear path: values at the nodes of a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray  # shape (M+1, d)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.steps + 1:
            raise DomainError(
                f"values has {v.shape[0]} rows, grid has {self.grid.steps + 1} nodes")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def horizon(self) -> float:
        return self.grid.horizon

    def value_at(self, t: float) -> np.ndarray:
        """Linear interpolation between nodes; exact at nodes."""
        if not (-_SNAP_TOL <= t <= self.horizon * (1 + _SNAP_TOL)):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        pos = np.clip(t / self.grid.dt, 0.0, float(self.grid.steps))
        k = int(np.floor(pos))
        if k >= self.grid.steps:
            return self.values[-1].copy()
        frac = pos - k
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]

    def terminal(self) -> np.ndarray:
        return self.values[-1].copy()

    def sup_norm(self) -> float:
        """Exact sup over [0, T] of the Euclidean norm of the path."""
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def component(self, i: int) -> "GridPath":
        return GridPath(self.grid, self.values[:, i].copy())

    @staticmethod
    def constant(grid: TimeGrid, value, dimension: int | None = None) -> "GridPath":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        if dimension is not None and v.size == 1:
            v = np.full(dimension, v[0])
        return GridPath(grid, np.tile(v, (grid.steps + 1, 1)))

    @staticmethod
    def zero(grid: TimeGrid, dimension: int = 1) -> "GridPath":
        return GridPath(grid, np.zeros((grid.steps + 1, dimension)))

    @staticmethod
    def from_function(grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "GridPath":
        vals = np.asarray(fn(grid.nodes()), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return GridPath(grid, vals)


@dataclass(frozen=True)
class PathPoint:
    """A point (t, x) of the path space; t is snapped to a grid node.

    Only the stopped portion x(. ^ t) is observable through the operations
    of this package; two points at zero pseudometric distance behave
    identically everywhere.
    """

    t: float
    path: GridPath
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "t", self.path.grid.snap(self.t))

    @property
    def node_index(self) -> int:
        return self.path.grid.index_of(self.t)

    def present_value(self) -> np.ndarray:
        return self.path.values[self.node_index].copy()

    def stopped(self) -> GridPath:
        return stop_path(self.path, self.t)


def _check_compatible(x: GridPath, y: GridPath) -> None:
    if x.dimension != y.dimension:
        raise DomainError(f"dimension mismatch: {x.dimension} vs {y.dimension}")
    if x.grid != y.grid:
        raise DomainError("paths live on different grids")


def stop_path(x: GridPath, t: float) -> GridPath:
    """Freeze ``x`` at (the node nearest to) ``t``: equal on [0,t], constant after."""
    k = x.grid.index_of(t)
    if k == x.grid.steps:
        return x
    vals = x.values.copy()
    vals[k + 1:] = vals[k]
    return GridPath(x.grid, vals)


def stopped_sup_distance(p: PathPoint, q: PathPoint) -> float:
    """sup-norm distance between the stopped representatives of two points."""
    _check_compatible(p.path, q.path)
    kp, kq = p.node_index, q.node_index
    vp, vq = p.path.values, q.path.values
    n = vp.shape[0]
    ap = np.where(np.arange(n)[:, None] <= kp, vp, vp[kp])
    aq = np.where(np.arange(n)[:, None] <= kq, vq, vq[kq])
    return float(np.max(np.linalg.norm(ap - aq, axis=1)))


def path_distance(p: PathPoint, q: PathPoint) -> float:
    """The pseudometric |t - t'| + ||x(. ^ t) - x'(. ^ t')||_inf.

    Vanishes exactly when the two stopped grid representatives and the two
    (snapped) times coincide; it does not separate paths that differ only
    after their stopping times.
    """
    return abs(p.t - q.t) + stopped_sup_distance(p, q)


# ---------------------------------------------------------------------------
# Brownian extension and semimartingale simulation
# ---------------------------------------------------------------------------

def brownian_increments(grid: TimeGrid, k_from: int, dimension: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Gaussian increments for nodes k_from+1 .. M, shape (M-k_from, d)."""
    n = grid.steps - k_from
    return rng.standard_normal((n, dimension)) * np.sqrt(grid.dt)


def extend_with_increments(t: float, x: GridPath, dW: np.ndarray) -> GridPath:
    """Deterministic Brownian extension of ``x`` after ``t`` driven by ``dW``.

    The result equals x on [0, t] and x(t) + cumulative-sum(dW) after; feeding
    the tail of the same driving increments from a later time reproduces the
    same sample (the flow identity of the extension).
    """
    k = x.grid.index_of(t)
    need = x.grid.steps - k
    dW = np.asarray(dW, float)
    if dW.ndim == 1:
        dW = dW[:, None]
    if dW.shape != (need, x.dimension):
        raise DomainError(f"increments shape {dW.shape} != {(need, x.dimension)}")
    vals = x.values.copy()
    if need:
        vals[k + 1:] = vals[k] + np.cumsum(dW, axis=0)
    return GridPath(x.grid, vals)


def brownian_extension(t: float, x: GridPath, seed: int, stream_index: int = 0) -> GridPath:
    """One sample of the Brownian extension of ``x`` from time ``t``."""
    k = x.grid.index_of(t)
    rng = sample_stream(seed, stream_index)
    dW = brownian_increments(x.grid, k, x.dimension, rng)
    return extend_with_increments(t, x, dW)


@dataclass(frozen=True)
class SemimartingaleSpec:
    """Drift/volatility pair for an Euler-Maruyama simulation.

    ``drift(t, state)`` returns shape (..., d) and ``volatility(t, state)``
    shape (..., d, d); both must broadcast over a leading batch axis and be
    bounded on compacts (caller contract).
    """

    drift: Callable[[float, np.ndarray], np.ndarray]
    volatility: Callable[[float, np.ndarray], np.ndarray]
    initial: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "initial",
                           np.atleast_1d(np.asarray(self.initial, dtype=float)))

    @property
    def dimension(self) -> int:
        return self.initial.size


def _euler_step(spec: SemimartingaleSpec, t: float, state: np.ndarray,
                dW: np.ndarray, dt: float) -> np.ndarray:
    mu = np.asarray(spec.drift(t, state), float)
    sig = np.asarray(spec.volatility(t, state), float)
    out = state + mu * dt + np.einsum("...ij,...j->...i", sig, dW)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite state after Euler step at t={t}")
    return out


def simulate_semimartingale(spec: SemimartingaleSpec, grid: TimeGrid,
                            seed: int, stream_index: int = 0) -> GridPath:
    """Single Euler-Maruyama sample path; reproducible under a fixed seed."""
    rng = sample_stream(seed, stream_index)
    dW = brownian_increments(grid, 0, spec.dimension, rng)
    vals = np.empty((grid.steps + 1, spec.dimension))
    vals[0] = spec.initial
    for k in range(grid.steps):
        vals[k + 1] = _euler_step(spec, grid.node(k), vals[k], dW[k], grid.dt)
    return GridPath(grid, vals)


def simulate_semimartingale_ensemble(spec: SemimartingaleSpec, grid: TimeGrid,
                                     n_samples: int, seed: int) -> np.ndarray:
    """Euler ensemble, shape (n, M+1, d); sample i uses stream i."""
    d = spec.dimension
    dW = np.empty((n_samples, grid.steps, d))
    for i in range(n_samples):
        dW[i] = brownian_increments(grid, 0, d, sample_stream(seed, i))
    vals = np.empty((n_samples, grid.steps + 1, d))
    vals[:, 0] = spec.initial
    for k in range(grid.steps):
        vals[:, k + 1] = _euler_step(spec, grid.node(k), vals[:, k], dW[:, k], grid.dt)
    return vals


# ---------------------------------------------------------------------------
# CSV serialization: header "t,x1,...,xd", full double precision
# ---------------------------------------------------------------------------

def write_path_csv(x: GridPath, target) -> None:
    """Write one row per grid node with 17 significant digits."""
    close = False
    if isinstance(target, (str, bytes)):
        target = open(target, "w")
        close = True
    try:
        cols = ",".join(f"x{i + 1}" for i in range(x.dimension))
        target.write(f"t,{cols}\n")
        for t, row in zip(x.grid.nodes(), x.values):
            target.write("%.17g," % t + ",".join("%.17g" % v for v in row) + "\n")
    finally:
        if close:
            target.close()


def read_path_csv(source) -> GridPath:
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            return read_path_csv(fh)
    if isinstance(source, str):
        source = io.StringIO(source)
    header = source.readline().strip().split(",")
    if header[0] != "t":
        raise DomainError("path CSV must start with a 't' column")
    data = np.loadtxt(source, delimiter=",", ndmin=2)
    t = data[:, 0]
    dts = np.diff(t)
    if len(dts) == 0 or not np.allclose(dts, dts[0], rtol=1e-12, atol=1e-15):
        raise DomainError("path CSV nodes are not a uniform grid")
    grid = TimeGrid(horizon=float(t[-1]), steps=len(t) - 1)
    return GridPath(grid, data[:, 1:])
