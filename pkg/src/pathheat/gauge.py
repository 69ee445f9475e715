"""Smooth gauge machinery: mollified sup-distance to an anchored path point,
its time-smoothed saturation, the gauge built from them, and perturbation
sums with uniformly bounded pathwise derivatives.

Structure of the computation
----------------------------
For a fixed anchor (t0, x0) and evaluation data (t, x, y), the mollified
distance is a Gaussian average of

    N(z) = || x(. ^ t) - x0(. ^ t0) - (y - x(t) + z) 1_[t,T] ||_inf,

minus the average of |z|.  On a grid this norm splits exactly into a
z-independent prefix (the stopped-path distance up to t) and a suffix which
is the farthest distance from z to a finite candidate set, so N is cheap to
evaluate at many z nodes.  Derivatives in y reduce to Gaussian moments of N.

All Gaussian rules used here have symmetric nodes and positive weights that
sum to one, and the |z| average is subtracted *under the same rule*.  The
two-sided comparison with the plain stopped-path distance D,

    D - E|z|  <=  value  <=  D,

then holds exactly at the quadrature level (the proofs only use node
symmetry and the triangle inequality), not merely up to quadrature error.

The time smoothing averages the saturated ratio v/(1+v) of the mollified
distance at shifted times (t+s)^T against the kernel sqrt(s/2pi) e^{-s/2}.
The substitution s = u^2 removes the sqrt kink at s = 0, and the constant
integrand beyond the horizon is integrated in closed form, so the s-rule is
a smooth Gauss-Legendre problem plus an exact tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammainc, gammaincc, gammaln

from .cylinders import PathwiseDerivs
from .errors import DomainError, NumericError
from .grids import GridPath, PathPoint, stopped_sup_distance
from .quadrature import QuadratureConfig, gaussian_rule, legendre_rule

__all__ = [
    "QuadratureConfig",
    "GaugeAnchor",
    "GaugeDiagnostics",
    "normal_density",
    "mean_gaussian_norm",
    "mean_gaussian_norm_quadrature",
    "horizontal_kernel",
    "horizontal_kernel_derivative",
    "horizontal_kernel_mass",
    "SmoothedDistance",
    "vertical_smoothed_distance",
    "stopped_distance",
    "horizontal_smoothed_distance",
    "smooth_gauge",
    "GaugeResult",
    "perturbation_sum",
    "PerturbationResult",
    "floored_norm_profile",
    "floored_norm_profile_slope",
    "curvature_profile",
    "VERTICAL_GRAD_BOUND",
    "VERTICAL_HESS_BOUND",
    "HORIZONTAL_BOUND",
    "SATURATED_GRAD_BOUND",
    "SATURATED_HESS_BOUND",
    "perturbation_bounds",
]

GaugeAnchor = PathPoint

# Uniform derivative bounds of the smoothing stages (dimension-free).
VERTICAL_GRAD_BOUND = 1.0
VERTICAL_HESS_BOUND = math.sqrt(2.0 / math.pi)
HORIZONTAL_BOUND = math.sqrt(2.0 / (math.pi * math.e))
SATURATED_GRAD_BOUND = 1.0
SATURATED_HESS_BOUND = math.sqrt(2.0 / math.pi) + 2.0


def perturbation_bounds(horizon: float) -> dict[str, float]:
    """Derivative bounds for perturbation sums over anchors on [0, T]."""
    return {
        "horizontal": 2.0 * (2.0 * horizon + HORIZONTAL_BOUND),
        "vertical": 2.0 * SATURATED_GRAD_BOUND,
        "vertical2": 2.0 * SATURATED_HESS_BOUND,
    }


# ---------------------------------------------------------------------------
# Kernels and closed-form constants
# ---------------------------------------------------------------------------

def normal_density(z) -> np.ndarray:
    """Standard Gaussian density on R^d; z has shape (..., d)."""
    z = np.atleast_2d(np.asarray(z, float))
    d = z.shape[-1]
    return np.exp(-0.5 * np.sum(z * z, axis=-1)) / (2.0 * np.pi) ** (d / 2.0)


def mean_gaussian_norm(dimension: int) -> float:
    """E|Z| for a d-dimensional standard Gaussian: sqrt(2) Gamma((d+1)/2) / Gamma(d/2)."""
    if dimension < 1:
        raise DomainError("dimension must be >= 1")
    return math.sqrt(2.0) * math.exp(
        gammaln((dimension + 1) / 2.0) - gammaln(dimension / 2.0))


def mean_gaussian_norm_quadrature(dimension: int, nodes: int = 128,
                                  r_max: float = 12.0) -> float:
    """E|Z| by radial Gauss-Legendre quadrature (smooth integrand, no kink)."""
    r, w = legendre_rule(0.0, r_max, nodes)
    log_c = (1.0 - dimension / 2.0) * math.log(2.0) - gammaln(dimension / 2.0)
    dens = np.exp(log_c + (dimension - 1) * np.log(np.maximum(r, 1e-300))
                  - 0.5 * r * r)
    return float(np.sum(w * r * dens))


def horizontal_kernel(s) -> np.ndarray:
    """The time mollifier sqrt(s / 2 pi) exp(-s/2); vanishes at s = 0."""
    s = np.asarray(s, float)
    if np.any(s < 0):
        raise DomainError("kernel argument must be >= 0")
    return np.sqrt(s / (2.0 * np.pi)) * np.exp(-0.5 * s)


def horizontal_kernel_derivative(s) -> np.ndarray:
    s = np.asarray(s, float)
    if np.any(s < 0):
        raise DomainError("kernel argument must be >= 0")
    out = np.empty_like(s, dtype=float)
    pos = s > 0
    sp = s[pos]
    out[pos] = (1.0 - sp) * np.exp(-0.5 * sp) / (2.0 * np.sqrt(2.0 * np.pi * sp))
    out[~pos] = np.inf
    return out


def horizontal_kernel_mass(s: float) -> float:
    """Closed-form mass of the kernel on [0, s]."""
    if s <= 0:
        return 0.0
    a = math.sqrt(s)
    phi = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
    cdf = 0.5 * (1.0 + math.erf(a / math.sqrt(2.0)))
    return 2.0 * cdf - 2.0 * a * phi - 1.0


# Tensor Gauss-Hermite is used for the gauge only up to dimension 2; the
# anchored integrands are kinked, so higher dimensions switch to the
# antithetic Monte-Carlo rule.
_GAUGE_GH_MAX_DIM = 2


def _z_rule(config: QuadratureConfig, dimension: int):
    return gaussian_rule(config, dimension, allow_exact=True,
                         gh_max_dim=_GAUGE_GH_MAX_DIM)


# ---------------------------------------------------------------------------
# Exact one-dimensional Gaussian moments of the piecewise-linear norm profile
# ---------------------------------------------------------------------------

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi(z: float) -> float:
    return math.exp(-0.5 * z * z) / _SQRT2PI


def _Phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _linear_piece_moments(alpha: float, beta: float, lo: float, hi: float):
    """Gaussian moments of (alpha + beta z) over [lo, hi]: static, z, z^2-1."""
    pl, pu = _phi(lo), _phi(hi)
    cl, cu = _Phi(lo), _Phi(hi)
    m0 = cu - cl
    m1 = pl - pu
    m2 = (cu - hi * pu) - (cl - lo * pl)          # int z^2 phi
    m3 = (lo * lo + 2.0) * pl - (hi * hi + 2.0) * pu  # int z^3 phi
    i_val = alpha * m0 + beta * m1
    i_z = alpha * m1 + beta * m2
    i_h = alpha * (m2 - m0) + beta * (m3 - m1)
    return i_val, i_z, i_h


_Z_CUTOFF = 39.0  # Gaussian mass beyond this is zero in double precision


def _piecewise_moments(a: float, lo: float, hi: float):
    mid = 0.5 * (lo + hi)
    if hi - mid >= a:
        pieces = [(hi, -1.0, -np.inf, mid), (-lo, 1.0, mid, np.inf)]
    else:
        zl, zr = hi - a, lo + a
        pieces = [(hi, -1.0, -np.inf, zl), (a, 0.0, zl, zr),
                  (-lo, 1.0, zr, np.inf)]
    val = grad = hess = 0.0
    for alpha, beta, l, u in pieces:
        l = max(l, -_Z_CUTOFF)
        u = min(u, _Z_CUTOFF)
        if l >= u:
            continue
        v, g, h = _linear_piece_moments(alpha, beta, l, u)
        val += v
        grad += g
        hess += h
    return val, grad, hess


# E|z| computed through the same pieces, so that the value at the anchor
# cancels to exactly 0.0 in floating point.
_EXACT_ABS_NORM = _piecewise_moments(0.0, 0.0, 0.0)[0]


def _exact_profile_1d(a: float, lo: float, hi: float):
    """Value/gradient/hessian Gaussian moments of max(a, hi - z, z - lo).

    ``a >= 0`` is the floor; [lo, hi] the candidate interval (farthest-point
    distance from z to it is max(hi - z, z - lo)).  Closed form via the
    normal cdf; the E|z| subtraction reuses the same closed forms.
    """
    val, grad, hess = _piecewise_moments(a, lo, hi)
    return val - _EXACT_ABS_NORM, grad, hess


# ---------------------------------------------------------------------------
# Anchored evaluation context
# ---------------------------------------------------------------------------

class _AnchorContext:
    """Geometry of the mollified distance for fixed (anchor, t, x, y),
    reusable across the shifted times (t+s) ^ T of the time smoothing."""

    def __init__(self, anchor: PathPoint, t: float, x: GridPath, y: np.ndarray):
        if x.grid != anchor.path.grid:
            raise DomainError("point and anchor must share a time grid")
        if x.dimension != anchor.path.dimension:
            raise DomainError("dimension mismatch between point and anchor")
        grid = x.grid
        self.grid = grid
        self.kt = grid.index_of(t)
        self.k0 = anchor.node_index
        xv = x.values
        av = anchor.path.values
        k = np.arange(grid.steps + 1)
        stopped_anchor = av[np.minimum(k, self.k0)]
        self.x_t = xv[self.kt].astype(float)
        y = np.atleast_1d(np.asarray(y, float))
        if y.shape != (x.dimension,):
            raise DomainError(f"present value must have shape ({x.dimension},)")
        self.center = 2.0 * self.x_t - y
        diff = xv[: self.kt + 1] - stopped_anchor[: self.kt + 1]
        self.base = float(np.max(np.linalg.norm(diff, axis=1)))
        if self.kt >= self.k0:
            self.q = stopped_anchor[self.k0][None, :]
            self.prefix_add = np.array([self.base])
        else:
            self.q = stopped_anchor[self.kt : self.k0 + 1].copy()
            gaps = np.linalg.norm(self.x_t[None, :] - self.q, axis=1)
            self.prefix_add = np.maximum.accumulate(gaps)
        self.single = self.kt >= self.k0

    def stopped_distance(self) -> float:
        """Plain stopped-path sup distance D between (t, x) and the anchor."""
        if self.single:
            return self.base
        return max(self.base, float(self.prefix_add[-1]))

    def _locate(self, t_prime: float):
        """Prefix floor, partial candidate, and first whole-node offset at t'."""
        grid = self.grid
        if self.single:
            return self.base, self.q[0], 1  # suffix = single candidate
        pos = min(t_prime, grid.horizon) / grid.dt
        j = pos - self.kt
        n_last = self.q.shape[0] - 1
        if j >= n_last:
            return max(self.base, float(self.prefix_add[-1])), self.q[-1], self.q.shape[0]
        jf = int(math.floor(j))
        frac = j - jf
        partial = (1.0 - frac) * self.q[jf] + frac * self.q[jf + 1]
        prefix = max(self.base, float(self.prefix_add[jf]),
                     float(np.linalg.norm(self.x_t - partial)))
        return prefix, partial, jf + 1


def _profile_rule(ctx: _AnchorContext, t_primes: np.ndarray, config: QuadratureConfig):
    """Mollified-distance value/gradient/hessian at each shifted time."""
    d = ctx.center.size
    n = len(t_primes)
    values = np.empty(n)
    grads = np.empty((n, d))
    hesses = np.empty((n, d, d))

    rule = _z_rule(config, d)
    if rule is None:  # exact one-dimensional rule
        c = float(ctx.center[0])
        qs = ctx.q[:, 0]
        # right-running extremes of the candidate values
        run_min = np.minimum.accumulate(qs[::-1])[::-1]
        run_max = np.maximum.accumulate(qs[::-1])[::-1]
        for i, tp in enumerate(t_primes):
            prefix, partial, j0 = ctx._locate(tp)
            if j0 < qs.size:
                q_lo = min(partial[0], run_min[j0])
                q_hi = max(partial[0], run_max[j0])
            else:
                q_lo = q_hi = partial[0]
            v, g, h = _exact_profile_1d(prefix, c - q_hi, c - q_lo)
            values[i], grads[i, 0], hesses[i, 0, 0] = v, g, h
        return values, grads, hesses

    z, w = rule
    abs_norm = float(np.sum(w * np.linalg.norm(z, axis=1)))
    # farthest-point running maxima over candidate suffixes, per z node
    p = ctx.center[None, :] - ctx.q            # (nq, d)
    dist = np.linalg.norm(p[:, None, :] - z[None, :, :], axis=2)  # (nq, nz)
    run = np.maximum.accumulate(dist[::-1], axis=0)[::-1]
    wz = w[:, None] * z
    for i, tp in enumerate(t_primes):
        prefix, partial, j0 = ctx._locate(tp)
        s_part = np.linalg.norm((ctx.center - partial)[None, :] - z, axis=1)
        if j0 < ctx.q.shape[0]:
            s_part = np.maximum(s_part, run[j0])
        nvals = np.maximum(prefix, s_part)
        values[i] = float(np.sum(w * nvals)) - abs_norm
        grads[i] = nvals @ wz
        hesses[i] = (nvals[:, None] * wz).T @ z - np.sum(w * nvals) * np.eye(d)
    return values, grads, hesses


# ---------------------------------------------------------------------------
# Public smoothing stages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothedDistance:
    """Vertically mollified anchored distance with its y-derivatives."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def vertical_smoothed_distance(anchor: PathPoint, t: float, x: GridPath,
                               y: np.ndarray,
                               config: QuadratureConfig = QuadratureConfig()
                               ) -> SmoothedDistance:
    """Gaussian mollification, in the jump direction, of the anchored
    stopped-path distance; nonnegative, 1-Lipschitz in y."""
    ctx = _AnchorContext(anchor, t, x, np.atleast_1d(np.asarray(y, float)))
    v, g, h = _profile_rule(ctx, np.asarray([x.grid.snap(t)]), config)
    if not np.isfinite(v[0]):
        raise NumericError("mollified distance integral diverged")
    return SmoothedDistance(value=float(v[0]), gradient=g[0], hessian=h[0])


def stopped_distance(anchor: PathPoint, point: PathPoint) -> float:
    """||x(. ^ t) - x0(. ^ t0)||_inf, the raw quantity being smoothed."""
    return stopped_sup_distance(point, anchor)


def _s_rule(t: float, horizon: float, config: QuadratureConfig):
    """Shifted times with kernel and kernel-derivative weights, plus tail."""
    s_star = horizon - t
    s_cut = min(config.s_max, max(s_star, 0.0))
    pts: list[float] = []
    wv: list[float] = []
    wh: list[float] = []
    if s_cut > 0:
        uu, gw = legendre_rule(0.0, math.sqrt(s_cut), config.s_nodes)
        ss = uu * uu
        base = np.exp(-0.5 * ss) / _SQRT2PI
        pts = list(t + ss)
        wv = list(gw * 2.0 * ss * base)
        wh = list(gw * (1.0 - ss) * base)
    tail_t = min(t + s_cut, horizon)
    wv_tail = 1.0 - horizontal_kernel_mass(s_cut)
    wh_tail = -float(horizontal_kernel(s_cut))
    pts.append(tail_t)
    wv.append(wv_tail)
    wh.append(wh_tail)
    return np.asarray(pts), np.asarray(wv), np.asarray(wh)


def horizontal_smoothed_distance(anchor: PathPoint, t: float, x: GridPath,
                                 y: Optional[np.ndarray] = None,
                                 config: QuadratureConfig = QuadratureConfig()
                                 ) -> tuple[float, PathwiseDerivs]:
    """Time-smoothed, saturated mollified distance with all derivatives.

    The saturation v/(1+v) keeps the value in [0, 1); averaging it at shifted
    times against the vanishing-at-zero kernel makes the map differentiable
    in the time direction with |horizontal| <= sqrt(2/(pi e)), while the
    vertical bounds 1 and sqrt(2/pi)+2 come through the chain rule.
    """
    t = x.grid.snap(t)
    if y is None:
        y = x.value_at(t)
    ctx = _AnchorContext(anchor, t, x, np.atleast_1d(np.asarray(y, float)))
    pts, wv, wh = _s_rule(t, x.horizon, config)
    vals, grads, hesses = _profile_rule(ctx, pts, config)
    ratio = vals / (1.0 + vals)
    value = float(np.sum(wv * ratio))
    horizontal = -float(np.sum(wh * ratio))
    inv2 = wv / (1.0 + vals) ** 2
    inv3 = wv / (1.0 + vals) ** 3
    vertical = inv2 @ grads
    vertical2 = (np.einsum("s,sij->ij", inv2, hesses)
                 - 2.0 * np.einsum("s,si,sj->ij", inv3, grads, grads))
    derivs = PathwiseDerivs(horizontal=horizontal, vertical=vertical,
                            vertical2=vertical2)
    return value, derivs


@dataclass(frozen=True)
class GaugeResult:
    value: float
    derivs: PathwiseDerivs
    time_term: float
    distance_term: float


def smooth_gauge(point: PathPoint, anchor: PathPoint,
                 config: QuadratureConfig = QuadratureConfig()) -> GaugeResult:
    """The gauge (t - t0)^2 + smoothed distance, with derivatives in the point.

    Vanishes exactly when the point coincides with the anchor (same stopped
    representative and time); smallness forces the pseudometric to be small
    through the calibrated lower bound of the smoothed distance.
    """
    chi, derivs = horizontal_smoothed_distance(anchor, point.t, point.path,
                                               point.present_value(), config)
    dt = point.t - anchor.t
    out = PathwiseDerivs(horizontal=derivs.horizontal + 2.0 * dt,
                         vertical=derivs.vertical, vertical2=derivs.vertical2)
    return GaugeResult(value=dt * dt + chi, derivs=out,
                       time_term=dt * dt, distance_term=chi)


@dataclass(frozen=True)
class PerturbationResult:
    value: float
    derivs: PathwiseDerivs
    tail_bound: float
    exact_tail: bool


def perturbation_sum(anchors: Sequence[PathPoint], point: PathPoint,
                     config: QuadratureConfig = QuadratureConfig(),
                     repeat_last: bool = False) -> PerturbationResult:
    """Geometric sum 2^{-n} gauge(point, anchor_n) over the anchor sequence.

    With ``repeat_last`` the final anchor stands for an eventually-constant
    tail and the geometric completion is exact; otherwise the truncated sum
    is returned together with the certified remainder bound
    2^{1-N} (T^2 + 1), using gauge <= T^2 + 1.
    """
    if not anchors:
        raise DomainError("perturbation_sum needs at least one anchor")
    horizon = point.path.horizon
    value = 0.0
    hor = 0.0
    vert = np.zeros(point.path.dimension)
    vert2 = np.zeros((point.path.dimension,) * 2)
    n = len(anchors)
    for i, a in enumerate(anchors):
        weight = 2.0 ** (-i)
        if repeat_last and i == n - 1:
            weight = 2.0 ** (-(n - 1)) * 2.0
        res = smooth_gauge(point, a, config)
        value += weight * res.value
        hor += weight * res.derivs.horizontal
        vert = vert + weight * res.derivs.vertical
        vert2 = vert2 + weight * res.derivs.vertical2
    if repeat_last:
        tail = 0.0
    else:
        tail = 2.0 ** (1 - n) * (horizon**2 + 1.0)
    return PerturbationResult(
        value=value,
        derivs=PathwiseDerivs(horizontal=hor, vertical=vert, vertical2=vert2),
        tail_bound=tail,
        exact_tail=repeat_last,
    )


# ---------------------------------------------------------------------------
# Radial profiles (diagnostics for the calibrated lower bound)
# ---------------------------------------------------------------------------

def _upper_radial_moment(dimension: int, k: int, a: float) -> float:
    """int_a^inf r^k chi_d(r) dr in terms of incomplete gamma functions."""
    s = (k + dimension) / 2.0
    coef = 2.0 ** (k / 2.0) * math.exp(gammaln(s) - gammaln(dimension / 2.0))
    return coef * float(gammaincc(s, 0.5 * a * a))


def floored_norm_profile(dimension: int, a: float) -> float:
    """E[max(a, |Z|)] - E|Z| for the d-dimensional standard Gaussian."""
    if a < 0:
        raise DomainError("profile argument must be >= 0")
    below = float(gammainc(dimension / 2.0, 0.5 * a * a))
    return (a * below + _upper_radial_moment(dimension, 1, a)
            - mean_gaussian_norm(dimension))


def floored_norm_profile_slope(dimension: int, a: float) -> float:
    """d/da of the profile: the chi-distribution cdf P(|Z| <= a)."""
    if a < 0:
        raise DomainError("profile argument must be >= 0")
    return float(gammainc(dimension / 2.0, 0.5 * a * a))


def curvature_profile(dimension: int, a: float) -> float:
    """E[max(a, |Z|) (|Z|^2 - d)]: positive, strictly decreasing to zero.

    Its value at 0 equals E|Z|; positivity on [0, 2 E|Z|] is what makes the
    mollified distance strictly convex at the anchor and hence the
    polynomial lower bound possible.
    """
    if a < 0:
        raise DomainError("profile argument must be >= 0")
    d = dimension
    i0 = _upper_radial_moment(d, 0, a)
    i1 = _upper_radial_moment(d, 1, a)
    i2 = _upper_radial_moment(d, 2, a)
    i3 = _upper_radial_moment(d, 3, a)
    return a * (d * i0 - i2) + i3 - d * i1


# ---------------------------------------------------------------------------
# Calibration of the polynomial lower-bound constant
# ---------------------------------------------------------------------------

@dataclass
class GaugeDiagnostics:
    """Empirically calibrated constants for one dimension."""

    dimension: int
    alpha: float
    item3_constant: float
    n_samples: int
    seed: int
    max_abs_derivs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError("alpha must lie in (0, 1]")


def lower_bound_ratio(anchor: PathPoint, point: PathPoint,
                      config: QuadratureConfig = QuadratureConfig()
                      ) -> tuple[float, float]:
    """(distance D, mollified value / min(D^{d+1}, D)); ratio inf calibrates alpha."""
    d = point.path.dimension
    val = vertical_smoothed_distance(anchor, point.t, point.path,
                                     point.present_value(), config).value
    dist = stopped_sup_distance(point, anchor)
    if dist < 1e-9:
        return dist, np.inf
    return dist, val / min(dist ** (d + 1), dist)


def calibrate_alpha(dimension: int, samples, config: QuadratureConfig = QuadratureConfig(),
                    shrink: float = 0.9, seed: int = 0) -> GaugeDiagnostics:
    """Estimate the lower-bound constant as the shrunk infimum ratio.

    ``samples`` is an iterable of (anchor, point) pairs; only existence of a
    positive constant is guaranteed in general, so the value is empirical and
    should be validated on fresh samples before use.
    """
    ratio_min = np.inf
    item3 = -np.inf
    count = 0
    czeta = mean_gaussian_norm(dimension)
    for anchor, point in samples:
        dist, ratio = lower_bound_ratio(anchor, point, config)
        val = vertical_smoothed_distance(anchor, point.t, point.path,
                                         point.present_value(), config).value
        if np.isfinite(ratio):
            ratio_min = min(ratio_min, ratio)
        item3 = max(item3, (dist - val) / czeta)
        count += 1
    if not np.isfinite(ratio_min) or count == 0:
        raise DomainError("calibration needs samples at positive distance")
    alpha = min(shrink * ratio_min, 1.0)
    return GaugeDiagnostics(dimension=dimension, alpha=alpha,
                            item3_constant=item3, n_samples=count, seed=seed)
