"""Gaussian quadrature rules shared by the gauge and solver modules.

All rules return (nodes, weights) for expectations against the standard
normal law: symmetric node sets with positive weights summing to one.
Symmetry and positivity are load-bearing: several two-sided bounds in this
package are proved at the level of any such rule, so they hold exactly for
the computed values rather than up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from .errors import DomainError

__all__ = [
    "QuadratureConfig",
    "gauss_hermite_rule",
    "monte_carlo_gaussian_rule",
    "gaussian_rule",
    "legendre_rule",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Rules for Gaussian (z) integrals and the time-kernel (s) integral.

    ``z_rule``: "auto" picks the exact piecewise rule in dimension 1,
    tensor Gauss-Hermite up to dimension 3, antithetic Monte Carlo beyond.
    The s-integral uses Gauss-Legendre in the substituted variable
    u = sqrt(s) (which removes the kernel's square-root kink) plus a
    closed-form tail beyond min(s_max, T - t).
    """

    z_rule: str = "auto"
    z_nodes: int = 21
    z_samples: int = 100_000
    z_seed: int = 20210
    s_max: float = 40.0
    s_nodes: int = 48

    def __post_init__(self):
        if self.s_max < 20.0:
            raise DomainError("s_max must be >= 20 (kernel tail certification)")
        if min(self.z_nodes, self.z_samples, self.s_nodes) <= 0:
            raise DomainError("node/sample counts must be positive")

    def resolve_z(self, dimension: int, allow_exact: bool = True,
                  gh_max_dim: int = 3) -> str:
        if self.z_rule != "auto":
            return self.z_rule
        if dimension == 1 and allow_exact:
            return "exact"
        if dimension <= gh_max_dim:
            return "gauss-hermite"
        return "monte-carlo"

    def refined(self) -> "QuadratureConfig":
        return QuadratureConfig(z_rule=self.z_rule, z_nodes=2 * self.z_nodes + 1,
                                z_samples=2 * self.z_samples, z_seed=self.z_seed,
                                s_max=self.s_max, s_nodes=2 * self.s_nodes)


@lru_cache(maxsize=32)
def gauss_hermite_rule(dimension: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite rule for E f(Z), Z standard normal in R^d."""
    x, w = hermgauss(nodes)
    z1 = math.sqrt(2.0) * x
    w1 = w / math.sqrt(math.pi)
    zg = np.meshgrid(*([z1] * dimension), indexing="ij")
    wg = np.meshgrid(*([w1] * dimension), indexing="ij")
    z = np.stack([g.ravel() for g in zg], axis=-1)
    wt = np.ones(z.shape[0])
    for g in wg:
        wt = wt * g.ravel()
    return z, wt


@lru_cache(maxsize=32)
def monte_carlo_gaussian_rule(dimension: int, samples: int,
                              seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-seed antithetic normal sample as a symmetric positive rule."""
    half = max(samples // 2, 1)
    rng = np.random.Generator(np.random.Philox(key=seed))
    z = rng.standard_normal((half, dimension))
    z = np.concatenate([z, -z], axis=0)
    w = np.full(z.shape[0], 1.0 / z.shape[0])
    return z, w


def gaussian_rule(config: QuadratureConfig, dimension: int,
                  allow_exact: bool = True, gh_max_dim: int = 3):
    """Resolve the configured rule; None signals the exact 1-d evaluation."""
    kind = config.resolve_z(dimension, allow_exact, gh_max_dim)
    if kind == "exact":
        if dimension != 1:
            raise DomainError("the exact z-rule is one-dimensional")
        return None
    if kind == "gauss-hermite":
        return gauss_hermite_rule(dimension, config.z_nodes)
    if kind == "monte-carlo":
        return monte_carlo_gaussian_rule(dimension, config.z_samples, config.z_seed)
    raise DomainError(f"unknown z rule {kind!r}")


def legendre_rule(a: float, b: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = leggauss(nodes)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * u, half * w
