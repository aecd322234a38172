"""3-D points, planes and the image method.

Everything is in meters and double precision.  Functions accept either
:class:`Point3` or any length-3 array-like and return :class:`Point3`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WORLD_UP = np.array([0.0, 0.0, 1.0])
WORLD_X = np.array([1.0, 0.0, 0.0])
_DEGENERATE_CROSS = 1e-6


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise GeometryError(f"non-finite point {self.x, self.y, self.z}")

    @classmethod
    def of(cls, p) -> "Point3":
        if isinstance(p, Point3):
            return p
        a = np.asarray(p, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __iter__(self):
        return iter((self.x, self.y, self.z))


def as_vec(p) -> np.ndarray:
    if isinstance(p, Point3):
        return p.vec
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise GeometryError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GeometryError("non-finite coordinates")
    return a


def in_plane_basis(normal) -> tuple[np.ndarray, np.ndarray, bool]:
    """Right-handed (u, v) with u horizontal and v = normal x u.

    Returns ``(u, v, degenerate)``; when the normal is (nearly) vertical the
    world x axis stands in for world-up and ``degenerate`` is True.
    """
    n = np.asarray(normal, dtype=float)
    up = WORLD_UP
    c = np.cross(up, n)
    degenerate = bool(np.linalg.norm(c) < _DEGENERATE_CROSS)
    if degenerate:
        up = WORLD_X
        c = np.cross(up, n)
    u = c / np.linalg.norm(c)
    v = np.cross(n, u)
    return u, v, degenerate


@dataclass(frozen=True)
class Plane:
    origin: np.ndarray
    normal: np.ndarray
    u_axis: np.ndarray = field(init=False, repr=False, compare=False)
    v_axis: np.ndarray = field(init=False, repr=False, compare=False)
    degenerate_basis: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        o = as_vec(self.origin)
        n = as_vec(self.normal)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise GeometryError("plane normal must be unit length")
        u, v, deg = in_plane_basis(n)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "u_axis", u)
        object.__setattr__(self, "v_axis", v)
        object.__setattr__(self, "degenerate_basis", deg)

    @classmethod
    def through(cls, origin, direction) -> "Plane":
        d = as_vec(direction)
        norm = np.linalg.norm(d)
        if norm == 0:
            raise GeometryError("zero-length normal")
        return cls(as_vec(origin), d / norm)

    def signed_distance(self, p) -> float:
        return float(np.dot(as_vec(p) - self.origin, self.normal))

    def to_world(self, u, v) -> np.ndarray:
        """Map in-plane coordinates (scalars or arrays) back to 3-D points."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.origin + u[..., None] * self.u_axis + v[..., None] * self.v_axis


def mirror_point(p, wall: Plane) -> Point3:
    a = as_vec(p)
    d = np.dot(a - wall.origin, wall.normal)
    return Point3.of(a - 2.0 * d * wall.normal)


def project_to_plane(p, plane: Plane) -> tuple[float, float]:
    a = as_vec(p) - plane.origin
    return float(np.dot(a, plane.u_axis)), float(np.dot(a, plane.v_axis))


def project_points(points: np.ndarray, plane: Plane) -> np.ndarray:
    """Vectorized :func:`project_to_plane` for an (N, 3) array; returns (N, 2)."""
    rel = np.asarray(points, dtype=float) - plane.origin
    return np.stack([rel @ plane.u_axis, rel @ plane.v_axis], axis=-1)


def segment_plane_intersection(a, b, plane: Plane):
    """Parameter t in [0, 1] and point where segment a->b crosses the plane, or None."""
    a = as_vec(a)
    b = as_vec(b)
    da = np.dot(a - plane.origin, plane.normal)
    db = np.dot(b - plane.origin, plane.normal)
    if da == db or da * db > 0:
        return None
    t = da / (da - db)
    return t, a + t * (b - a)


def azimuth(vec) -> float:
    """Azimuth of a direction in [-pi, pi)."""
    v = np.asarray(vec, dtype=float)
    return wrap_angle(float(np.arctan2(v[1], v[0])))


def wrap_angle(a):
    """Wrap radians into [-pi, pi)."""
    w = (np.asarray(a, dtype=float) + np.pi) % (2 * np.pi) - np.pi
    return float(w) if w.ndim == 0 else w


def los_blocked(tx, rx, screen) -> bool:
    """True when the Tx-Rx segment pierces an occupied cell of ``screen``.

    A piercing point on a shared cell edge or corner counts as blocked if any
    touching cell is occupied.
    """
    hit = segment_plane_intersection(tx, rx, screen.plane)
    if hit is None:
        raise GeometryError("screen plane does not lie between tx and rx")
    t, p = hit
    if t <= 0.0 or t >= 1.0:
        raise GeometryError("screen plane does not lie strictly between tx and rx")
    u, v = project_to_plane(p, screen.plane)
    return screen.occupied_at(u, v)
