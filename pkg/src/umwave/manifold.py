"""The unimodular manifold UM(N, M) and the product manifold R x UM(N, M).

Points are ``(alpha, X)`` pairs with ``|X[n, m]| == 1``. Tangent vectors at
``X`` are complex matrices ``Xi`` with ``Re(Xi * conj(X)) == 0`` entrywise.
The metric is the one induced from C^{N x M} viewed as R^{2NM}:
``<U, V> = Re Tr(U^H V)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RETRACTION_EPS = 1e-14


class RetractionError(ArithmeticError):
    """X + Xi has an entry too close to zero to renormalize."""


@dataclass(frozen=True, eq=False)
class ProductPoint:
    alpha: float
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=complex))


@dataclass(frozen=True, eq=False)
class ProductTangent:
    xi_alpha: float
    xi_x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi_alpha", float(self.xi_alpha))
        object.__setattr__(self, "xi_x", np.asarray(self.xi_x, dtype=complex))

    def scale(self, c: float) -> "ProductTangent":
        return ProductTangent(c * self.xi_alpha, c * self.xi_x)

    def __neg__(self) -> "ProductTangent":
        return self.scale(-1.0)

    def __add__(self, other: "ProductTangent") -> "ProductTangent":
        return ProductTangent(self.xi_alpha + other.xi_alpha, self.xi_x + other.xi_x)

    def __sub__(self, other: "ProductTangent") -> "ProductTangent":
        return ProductTangent(self.xi_alpha - other.xi_alpha, self.xi_x - other.xi_x)


def is_unimodular(x: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(np.abs(x) - 1.0) <= tol))


def tangency_residual(x: np.ndarray, xi: np.ndarray) -> float:
    """max |Re(xi * conj(x))|; zero for tangent vectors."""
    return float(np.max(np.abs(np.real(xi * np.conj(x))), initial=0.0))


def project_tangent(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient matrix onto T_X UM(N, M)."""
    return z - np.real(z * np.conj(x)) * x


def inner(p: ProductPoint, u: ProductTangent, v: ProductTangent) -> float:
    return u.xi_alpha * v.xi_alpha + float(np.real(np.vdot(u.xi_x, v.xi_x)))


def norm(p: ProductPoint, u: ProductTangent) -> float:
    return float(np.sqrt(inner(p, u, u)))


def retract_x(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    y = x + xi
    mag = np.abs(y)
    if np.any(mag < RETRACTION_EPS):
        n, m = np.unravel_index(int(np.argmin(mag)), mag.shape)
        raise RetractionError(f"retraction singular at entry ({n}, {m}): |x + xi| = {mag[n, m]:.3e}")
    return y / mag


def retract(p: ProductPoint, t: ProductTangent) -> ProductPoint:
    return ProductPoint(p.alpha + t.xi_alpha, retract_x(p.x, t.xi_x))


def transport_to(target: ProductPoint, t: ProductTangent) -> ProductTangent:
    """Projection-based vector transport into the tangent space at ``target``.

    Only the destination point matters, so callers never need an inverse
    retraction to find the connecting tangent vector.
    """
    return ProductTangent(t.xi_alpha, project_tangent(target.x, t.xi_x))


def random_unimodular(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=shape))


def random_tangent(p: ProductPoint, rng: np.random.Generator) -> ProductTangent:
    z = rng.standard_normal(p.x.shape) + 1j * rng.standard_normal(p.x.shape)
    return ProductTangent(rng.standard_normal(), project_tangent(p.x, z))


def random_point(cfg, rng: np.random.Generator) -> ProductPoint:
    """Uniform random phases, with alpha at its closed-form optimum for that X."""
    from .solvers import init_alpha  # avoid an import cycle at module load

    x = random_unimodular(cfg.shape, rng)
    return ProductPoint(init_alpha(x, cfg), x)
