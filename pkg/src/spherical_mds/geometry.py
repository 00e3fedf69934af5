"""Points, geodesic distances and distance gradients for the three constant-curvature planes.

Spherical points are (latitude, longitude) in radians with latitude in
[-pi/2, pi/2] and longitude in [0, 2pi). Hyperbolic points use native polar
coordinates (r, theta). Euclidean points are plain (x, y).

Batched helpers take ``(n, 2)`` float arrays in the same column order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .graph_io import DistanceMatrix

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

SPHERICAL = "spherical"
EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"
GEOMETRIES = (SPHERICAL, EUCLIDEAN, HYPERBOLIC)


class SingularGradientError(ArithmeticError):
    """The distance is not differentiable at coincident (or antipodal) points."""


class SphericalPoint(NamedTuple):
    phi: float
    lam: float


class EuclideanPoint(NamedTuple):
    x: float
    y: float


class HyperbolicPoint(NamedTuple):
    r: float
    theta: float


@dataclass(frozen=True)
class Geometry:
    kind: str
    radius: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.kind!r}; expected one of {GEOMETRIES}")
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    @classmethod
    def spherical(cls, radius: float = 1.0) -> "Geometry":
        return cls(SPHERICAL, radius)

    @classmethod
    def euclidean(cls) -> "Geometry":
        return cls(EUCLIDEAN)

    @classmethod
    def hyperbolic(cls) -> "Geometry":
        return cls(HYPERBOLIC)

    def point(self, a: float, b: float):
        if self.kind == SPHERICAL:
            return normalize_spherical(SphericalPoint(a, b))
        if self.kind == HYPERBOLIC:
            return normalize_hyperbolic(HyperbolicPoint(a, b))
        return EuclideanPoint(float(a), float(b))

    def distance(self, p, q) -> float:
        if self.kind == SPHERICAL:
            return spherical_distance(p, q, self.radius)
        if self.kind == HYPERBOLIC:
            return hyperbolic_distance(p, q)
        return euclidean_distance(p, q)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def normalize_spherical(p: SphericalPoint) -> SphericalPoint:
    """Fold latitude into [-pi/2, pi/2] (reflecting over a pole flips longitude) and wrap longitude."""
    phi = math.remainder(p.phi, TWO_PI)  # (-pi, pi]
    lam = p.lam
    if phi > HALF_PI:
        phi = math.pi - phi
        lam += math.pi
    elif phi < -HALF_PI:
        phi = -math.pi - phi
        lam += math.pi
    lam = lam % TWO_PI
    if lam >= TWO_PI:
        lam = 0.0
    return SphericalPoint(phi, lam)


def normalize_hyperbolic(p: HyperbolicPoint) -> HyperbolicPoint:
    r, theta = p.r, p.theta
    if r < 0:
        r, theta = -r, theta + math.pi
    if r == 0:
        return HyperbolicPoint(0.0, 0.0)
    theta = theta % TWO_PI
    if theta >= TWO_PI:
        theta = 0.0
    return HyperbolicPoint(r, theta)


def normalize_coords(coords: np.ndarray, kind: str) -> np.ndarray:
    """Vectorized normalization of an ``(n, 2)`` coordinate array (returns a new array)."""
    c = np.array(coords, dtype=float, copy=True)
    if kind == SPHERICAL:
        out = np.abs(c[:, 0]) > HALF_PI
        if np.any(out):
            phi = np.remainder(c[out, 0] + math.pi, TWO_PI) - math.pi
            hi = phi > HALF_PI
            lo = phi < -HALF_PI
            phi[hi] = math.pi - phi[hi]
            phi[lo] = -math.pi - phi[lo]
            c[out, 0] = phi
            c[np.flatnonzero(out)[hi | lo], 1] += math.pi
        _wrap_angles(c[:, 1])
    elif kind == HYPERBOLIC:
        neg = c[:, 0] < 0
        c[neg, 0] *= -1
        c[neg, 1] += math.pi
        _wrap_angles(c[:, 1])
        c[c[:, 0] == 0, 1] = 0.0
    return c


def _wrap_angles(a: np.ndarray) -> None:
    out = (a < 0) | (a >= TWO_PI)
    if np.any(out):
        a[out] = np.remainder(a[out], TWO_PI)
        a[a >= TWO_PI] = 0.0


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def _sphere_cos(phi1, lam1, phi2, lam2):
    return math.sin(phi1) * math.sin(phi2) + math.cos(phi1) * math.cos(phi2) * math.cos(lam1 - lam2)


def spherical_distance(p: SphericalPoint, q: SphericalPoint, radius: float = 1.0) -> float:
    """Great-circle distance by the spherical law of cosines."""
    c = _sphere_cos(p[0], p[1], q[0], q[1])
    return radius * math.acos(min(1.0, max(-1.0, c)))


def euclidean_distance(p: EuclideanPoint, q: EuclideanPoint) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def _hyper_excess(r1, t1, r2, t2):
    """cosh(d) - 1 without cancellation: 2 sinh^2((r1-r2)/2) + 2 sinh r1 sinh r2 sin^2(dtheta/2)."""
    a = math.sinh(0.5 * (r1 - r2))
    b = math.sin(0.5 * (t1 - t2))
    return 2.0 * (a * a + math.sinh(r1) * math.sinh(r2) * b * b)


def hyperbolic_distance(p: HyperbolicPoint, q: HyperbolicPoint) -> float:
    """Hyperbolic law of cosines in polar coordinates (curvature -1)."""
    u = max(0.0, _hyper_excess(p[0], p[1], q[0], q[1]))
    return math.log1p(u + math.sqrt(u * (u + 2.0)))


def spherical_distance_gradient(p: SphericalPoint, q: SphericalPoint) -> tuple[float, float]:
    """Partial derivatives of the unit-sphere distance with respect to ``p``'s (phi, lambda).

    Raises :class:`SingularGradientError` when the points coincide or are antipodal.
    """
    phi1, lam1 = p
    phi2, lam2 = q
    c = min(1.0, max(-1.0, _sphere_cos(phi1, lam1, phi2, lam2)))
    s = math.sqrt(1.0 - c * c)
    if s < 1e-12:
        raise SingularGradientError("spherical distance gradient undefined for coincident or antipodal points")
    dlam = lam1 - lam2
    dphi = -(math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)) / s
    dlambda = math.cos(phi1) * math.cos(phi2) * math.sin(dlam) / s
    return dphi, dlambda


def euclidean_distance_gradient(p: EuclideanPoint, q: EuclideanPoint) -> tuple[float, float]:
    dx, dy = p[0] - q[0], p[1] - q[1]
    r = math.hypot(dx, dy)
    if r < 1e-12:
        raise SingularGradientError("euclidean distance gradient undefined for coincident points")
    return dx / r, dy / r


def hyperbolic_distance_gradient(p: HyperbolicPoint, q: HyperbolicPoint) -> tuple[float, float]:
    """Partial derivatives of the hyperbolic distance with respect to ``p``'s (r, theta)."""
    r1, t1 = p
    r2, t2 = q
    u = max(0.0, _hyper_excess(r1, t1, r2, t2))
    s = math.sqrt(u * (u + 2.0))
    if s < 1e-12:
        raise SingularGradientError("hyperbolic distance gradient undefined for coincident points")
    dt = t1 - t2
    dr = (math.sinh(r1) * math.cosh(r2) - math.cosh(r1) * math.sinh(r2) * math.cos(dt)) / s
    dtheta = math.sinh(r1) * math.sinh(r2) * math.sin(dt) / s
    return dr, dtheta


DISTANCE = {
    SPHERICAL: lambda p, q: spherical_distance(p, q, 1.0),
    EUCLIDEAN: euclidean_distance,
    HYPERBOLIC: hyperbolic_distance,
}
DISTANCE_GRADIENT = {
    SPHERICAL: spherical_distance_gradient,
    EUCLIDEAN: euclidean_distance_gradient,
    HYPERBOLIC: hyperbolic_distance_gradient,
}


# ---------------------------------------------------------------------------
# Batched distances
# ---------------------------------------------------------------------------

def to_cartesian(coords: np.ndarray) -> np.ndarray:
    """Unit vectors for an ``(n, 2)`` array of (lat, lon)."""
    phi, lam = coords[:, 0], coords[:, 1]
    cphi = np.cos(phi)
    return np.column_stack([cphi * np.cos(lam), cphi * np.sin(lam), np.sin(phi)])


def from_cartesian(xyz: np.ndarray) -> np.ndarray:
    xyz = np.atleast_2d(xyz)
    xyz = xyz / np.linalg.norm(xyz, axis=1, keepdims=True)
    phi = np.arcsin(np.clip(xyz[:, 2], -1.0, 1.0))
    lam = np.remainder(np.arctan2(xyz[:, 1], xyz[:, 0]), TWO_PI)
    lam[lam >= TWO_PI] = 0.0
    return np.column_stack([phi, lam])


def cosine_matrix(coords: np.ndarray, kind: str) -> np.ndarray:
    """Law-of-cosines argument for every pair (spherical and hyperbolic only), unclamped."""
    a, b = coords[:, 0], coords[:, 1]
    if kind == SPHERICAL:
        return (np.sin(a)[:, None] * np.sin(a)[None, :]
                + np.cos(a)[:, None] * np.cos(a)[None, :] * np.cos(b[:, None] - b[None, :]))
    if kind == HYPERBOLIC:
        return (np.cosh(a)[:, None] * np.cosh(a)[None, :]
                - np.sinh(a)[:, None] * np.sinh(a)[None, :] * np.cos(b[:, None] - b[None, :]))
    raise ValueError(kind)


def distance_matrix(coords: np.ndarray, kind: str, radius: float = 1.0) -> np.ndarray:
    """All pairwise distances for an ``(n, 2)`` coordinate array."""
    coords = np.asarray(coords, dtype=float)
    if kind == EUCLIDEAN:
        diff = coords[:, None, :] - coords[None, :, :]
        out = np.sqrt((diff ** 2).sum(-1))
    elif kind == SPHERICAL:
        out = radius * np.arccos(np.clip(cosine_matrix(coords, kind), -1.0, 1.0))
    elif kind == HYPERBOLIC:
        r, t = coords[:, 0], coords[:, 1]
        a = np.sinh(0.5 * (r[:, None] - r[None, :]))
        b = np.sin(0.5 * (t[:, None] - t[None, :]))
        u = np.maximum(2.0 * (a * a + np.sinh(r)[:, None] * np.sinh(r)[None, :] * b * b), 0.0)
        out = np.log1p(u + np.sqrt(u * (u + 2.0)))
    else:
        raise ValueError(kind)
    np.fill_diagonal(out, 0.0)
    return 0.5 * (out + out.T)


def pairwise_distances(points: Sequence, geom: Geometry) -> DistanceMatrix:
    coords = np.asarray([tuple(p) for p in points], dtype=float).reshape(-1, 2)
    if len(coords) < 2:
        raise ValueError("need at least two points")
    return DistanceMatrix(distance_matrix(coords, geom.kind, geom.radius), 1.0)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_uniform_coords(kind: str, n: int, extent: float, rng: np.random.Generator) -> np.ndarray:
    """Area-uniform samples as an ``(n, 2)`` array; ``extent`` is the disk radius off the sphere."""
    if n == 0:
        return np.zeros((0, 2))
    if kind == SPHERICAL:
        u = rng.random(n)
        lam = rng.random(n) * TWO_PI
        return np.column_stack([np.arcsin(2.0 * u - 1.0), lam])
    if extent <= 0:
        raise ValueError("extent must be positive")
    u = rng.random(n)
    theta = rng.random(n) * TWO_PI
    if kind == EUCLIDEAN:
        r = extent * np.sqrt(u)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    if kind == HYPERBOLIC:
        # area of a hyperbolic disk of radius r is 2*pi*(cosh r - 1)
        r = np.arccosh(1.0 + u * (math.cosh(extent) - 1.0))
        return normalize_coords(np.column_stack([r, theta]), HYPERBOLIC)
    raise ValueError(kind)


def sample_uniform(geom: Geometry, n: int, extent: float = 1.0, seed: int = 0) -> list:
    """Deterministic area-uniform points of ``geom``'s kind."""
    coords = sample_uniform_coords(geom.kind, n, extent, np.random.default_rng(seed))
    cls = {SPHERICAL: SphericalPoint, EUCLIDEAN: EuclideanPoint, HYPERBOLIC: HyperbolicPoint}[geom.kind]
    return [cls(float(a), float(b)) for a, b in coords]
