"""Exact 2D geometry primitives shared by the ray tracer and the positioning code.

Angle convention used throughout the toolkit: a bearing is measured in degrees,
clockwise from the +y axis ("north"), normalized to [0, 360). A bearing theta
corresponds to the unit direction (sin theta, cos theta), so 0 deg points +y,
90 deg points +x.

Lines are carried in normalized general form n_x*x + n_y*y = c rather than
slope-intercept form, which removes the vertical-line singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import AmbiguousIntersection, DegenerateGeometry, DomainError, ParallelLines

# Tolerance on the normalized determinant below which two lines count as parallel.
PARALLEL_EPS = 1e-9
# Relative tolerance for parallel/collinear segment classification.
_CROSS_EPS = 1e-12


@dataclass(frozen=True)
class Point2:
    """A 2D point in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite point ({self.x}, {self.y})")

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Segment:
    """A wall primitive: the closed segment between two distinct endpoints."""

    a: Point2
    b: Point2

    def __post_init__(self):
        if self.a.x == self.b.x and self.a.y == self.b.y:
            raise DegenerateGeometry(f"zero-length segment at {self.a}")

    @property
    def length(self) -> float:
        return self.a.distance_to(self.b)


@dataclass(frozen=True)
class Bearing:
    """An angle in degrees, clockwise from +y, normalized to [0, 360)."""

    degrees: float

    def __post_init__(self):
        if not math.isfinite(self.degrees):
            raise DomainError(f"non-finite bearing {self.degrees}")
        object.__setattr__(self, "degrees", self.degrees % 360.0)

    @property
    def radians(self) -> float:
        return math.radians(self.degrees)

    def unit(self) -> tuple[float, float]:
        """Unit direction (sin theta, cos theta) this bearing points along."""
        r = self.radians
        return math.sin(r), math.cos(r)


@dataclass(frozen=True)
class Line:
    """The locus n_x*x + n_y*y = c, normalized so that n_x^2 + n_y^2 = 1 and
    the first nonzero coefficient is positive."""

    nx: float
    ny: float
    c: float

    @staticmethod
    def from_coefficients(nx: float, ny: float, c: float) -> "Line":
        norm = math.hypot(nx, ny)
        if norm == 0.0:
            raise DegenerateGeometry("line with zero normal vector")
        nx, ny, c = nx / norm, ny / norm, c / norm
        if nx < 0.0 or (nx == 0.0 and ny < 0.0):
            nx, ny, c = -nx, -ny, -c
        return Line(nx, ny, c)

    @staticmethod
    def from_points(p: Point2, q: Point2) -> "Line":
        """The line through two distinct points."""
        dx, dy = q.x - p.x, q.y - p.y
        if dx == 0.0 and dy == 0.0:
            raise DegenerateGeometry("line through coincident points")
        # Normal perpendicular to the direction (dx, dy).
        return Line.from_coefficients(dy, -dx, dy * p.x - dx * p.y)

    def evaluate(self, p: Point2) -> float:
        """Signed residual n.p - c; zero iff p lies on the line."""
        return self.nx * p.x + self.ny * p.y - self.c

    def distance_to(self, p: Point2) -> float:
        return abs(self.evaluate(p))

    def is_close(self, other: "Line", tol: float = 1e-9) -> bool:
        return (
            abs(self.nx - other.nx) <= tol
            and abs(self.ny - other.ny) <= tol
            and abs(self.c - other.c) <= tol
        )


def bearing_from_to(origin: Point2, target: Point2) -> Bearing:
    """Bearing of the ray from `origin` toward `target`.

    The returned bearing theta satisfies origin + d*(sin theta, cos theta) = target
    with d = |target - origin|.
    """
    dx, dy = target.x - origin.x, target.y - origin.y
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometry("bearing between coincident points")
    return Bearing(math.degrees(math.atan2(dx, dy)))


def mirror_point(p: Point2, s: Segment) -> Point2:
    """Reflect `p` across the infinite line through segment `s`.

    Applying the reflection twice returns the original point.
    """
    dx, dy = s.b.x - s.a.x, s.b.y - s.a.y
    d2 = dx * dx + dy * dy
    if d2 == 0.0:
        raise DegenerateGeometry("mirror across zero-length segment")
    t = ((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / d2
    fx, fy = s.a.x + t * dx, s.a.y + t * dy
    return Point2(2.0 * fx - p.x, 2.0 * fy - p.y)


def _cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def segment_intersection(s1: Segment, s2: Segment) -> Optional[Point2]:
    """Unique intersection point of two closed segments, if any.

    Returns None for disjoint segments. Collinear segments overlapping in more
    than one point raise AmbiguousIntersection; collinear segments touching at
    a single endpoint return that point.
    """
    rx, ry = s1.b.x - s1.a.x, s1.b.y - s1.a.y
    sx, sy = s2.b.x - s2.a.x, s2.b.y - s2.a.y
    qx, qy = s2.a.x - s1.a.x, s2.a.y - s1.a.y
    denom = _cross(rx, ry, sx, sy)
    rlen, slen = math.hypot(rx, ry), math.hypot(sx, sy)
    if abs(denom) <= _CROSS_EPS * rlen * slen:
        # Parallel; collinear iff s2.a lies on the line through s1.
        qlen = math.hypot(qx, qy)
        if abs(_cross(qx, qy, rx, ry)) > _CROSS_EPS * max(qlen, slen) * rlen:
            return None
        # Collinear: compare 1D extents along s1's direction.
        r2 = rx * rx + ry * ry
        t0 = (qx * rx + qy * ry) / r2
        t1 = t0 + (sx * rx + sy * ry) / r2
        lo, hi = min(t0, t1), max(t0, t1)
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        tol = _CROSS_EPS * max(1.0, abs(lo), abs(hi))
        if hi < lo - tol:
            return None
        if hi - lo <= tol:
            t = 0.5 * (lo + hi)
            return Point2(s1.a.x + t * rx, s1.a.y + t * ry)
        raise AmbiguousIntersection("collinear segments overlap in more than one point")
    t = _cross(qx, qy, sx, sy) / denom
    u = _cross(qx, qy, rx, ry) / denom
    eps = 1e-12
    if -eps <= t <= 1.0 + eps and -eps <= u <= 1.0 + eps:
        return Point2(s1.a.x + t * rx, s1.a.y + t * ry)
    return None


def intersect_lines(l1: Line, l2: Line, eps: float = PARALLEL_EPS) -> Point2:
    """Solve the 2x2 system of two normalized general-form lines.

    Raises ParallelLines when the determinant magnitude falls below `eps`,
    signalling that the pair carries no positional information.
    """
    det = l1.nx * l2.ny - l1.ny * l2.nx
    if abs(det) < eps:
        raise ParallelLines(f"determinant {det:.3e} below {eps:.0e}")
    x = (l1.c * l2.ny - l2.c * l1.ny) / det
    y = (l1.nx * l2.c - l2.nx * l1.c) / det
    return Point2(x, y)
