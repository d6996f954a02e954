"""Shared planar geometry kernel.

Every angle and chart computation in the package routes through here so that
identical inputs produce bit-identical outputs everywhere.  All tolerances
derive from TOL_GEOM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TOL_GEOM = 1e-9

Vec = tuple[float, float]


def sub(a: Vec, b: Vec) -> Vec:
    return (a[0] - b[0], a[1] - b[1])


def add(a: Vec, b: Vec) -> Vec:
    return (a[0] + b[0], a[1] + b[1])


def scale(a: Vec, s: float) -> Vec:
    return (a[0] * s, a[1] * s)


def dot(a: Vec, b: Vec) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a: Vec, b: Vec) -> float:
    return a[0] * b[1] - a[1] * b[0]


def norm(a: Vec) -> float:
    return math.hypot(a[0], a[1])


def dist(a: Vec, b: Vec) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def unit(a: Vec) -> Vec:
    n = norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return (a[0] / n, a[1] / n)


def rotate(a: Vec, theta: float) -> Vec:
    c, s = math.cos(theta), math.sin(theta)
    return (c * a[0] - s * a[1], s * a[0] + c * a[1])


def perp(a: Vec) -> Vec:
    """Rotate by +90 degrees."""
    return (-a[1], a[0])


def angle_of(a: Vec) -> float:
    return math.atan2(a[1], a[0])


def angle_between(a: Vec, b: Vec) -> float:
    """Unsigned angle in [0, pi] between two nonzero vectors."""
    c = dot(a, b) / (norm(a) * norm(b))
    c = max(-1.0, min(1.0, c))
    return math.acos(c)


def triangle_angle(opposite: float, s1: float, s2: float) -> float:
    """Interior angle facing `opposite` in a triangle with sides s1, s2 adjacent.

    Raises ValueError when the three lengths violate the strict triangle
    inequality (degenerate triangles are rejected).
    """
    if opposite <= 0 or s1 <= 0 or s2 <= 0:
        raise ValueError("triangle side lengths must be positive")
    if opposite >= s1 + s2 - TOL_GEOM or s1 >= opposite + s2 - TOL_GEOM \
            or s2 >= opposite + s1 - TOL_GEOM:
        raise ValueError(
            f"side lengths ({opposite}, {s1}, {s2}) violate the triangle inequality")
    c = (s1 * s1 + s2 * s2 - opposite * opposite) / (2.0 * s1 * s2)
    c = max(-1.0, min(1.0, c))
    return math.acos(c)


def triangle_chart(l0: float, l1: float, l2: float) -> list[Vec]:
    """Planar corner positions for a triangle with side i joining corner i to i+1.

    Corner 0 sits at the origin, corner 1 at (l0, 0), corner 2 above the axis.
    """
    x = (l0 * l0 + l2 * l2 - l1 * l1) / (2.0 * l0)
    h2 = l2 * l2 - x * x
    if h2 <= 0:
        raise ValueError(f"degenerate triangle ({l0}, {l1}, {l2})")
    return [(0.0, 0.0), (l0, 0.0), (x, math.sqrt(h2))]


SQUARE_CHART: list[Vec] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


@dataclass(frozen=True)
class Isometry:
    """Planar isometry x -> M x + t with M orthogonal (det +-1)."""

    m00: float
    m01: float
    m10: float
    m11: float
    tx: float
    ty: float

    def apply(self, p: Vec) -> Vec:
        return (self.m00 * p[0] + self.m01 * p[1] + self.tx,
                self.m10 * p[0] + self.m11 * p[1] + self.ty)

    def apply_vec(self, v: Vec) -> Vec:
        return (self.m00 * v[0] + self.m01 * v[1],
                self.m10 * v[0] + self.m11 * v[1])

    def compose(self, other: "Isometry") -> "Isometry":
        """Return self after other (i.e. x -> self(other(x)))."""
        return Isometry(
            self.m00 * other.m00 + self.m01 * other.m10,
            self.m00 * other.m01 + self.m01 * other.m11,
            self.m10 * other.m00 + self.m11 * other.m10,
            self.m10 * other.m01 + self.m11 * other.m11,
            self.m00 * other.tx + self.m01 * other.ty + self.tx,
            self.m10 * other.tx + self.m11 * other.ty + self.ty,
        )

    @staticmethod
    def identity() -> "Isometry":
        return Isometry(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    @staticmethod
    def from_segment_map(a0: Vec, a1: Vec, b0: Vec, b1: Vec, flip: bool) -> "Isometry":
        """Isometry sending segment a0a1 onto b0b1 (a0 to b0).

        With flip=False the map preserves orientation, with flip=True it
        reflects.  Segment lengths must agree.
        """
        u = sub(a1, a0)
        v = sub(b1, b0)
        lu, lv = norm(u), norm(v)
        if abs(lu - lv) > 1e-7 * max(1.0, lu):
            raise ValueError(f"segment lengths differ: {lu} vs {lv}")
        cu, su = u[0] / lu, u[1] / lu
        cv, sv = v[0] / lv, v[1] / lv
        if not flip:
            # rotation R with R u = v
            m00 = cu * cv + su * sv
            m10 = cu * sv - su * cv
            m01, m11 = -m10, m00
        else:
            # reflection F with F u = v
            m00 = cu * cv - su * sv
            m10 = cu * sv + su * cv
            m01, m11 = m10, -m00
        tx = b0[0] - (m00 * a0[0] + m01 * a0[1])
        ty = b0[1] - (m10 * a0[0] + m11 * a0[1])
        return Isometry(m00, m01, m10, m11, tx, ty)


def seg_param_at(a: Vec, b: Vec, p: Vec) -> float:
    """Parameter t in [0,1] of the projection of p onto segment ab."""
    u = sub(b, a)
    L2 = dot(u, u)
    if L2 == 0.0:
        return 0.0
    return dot(sub(p, a), u) / L2


def point_segment_dist(p: Vec, a: Vec, b: Vec) -> float:
    t = max(0.0, min(1.0, seg_param_at(a, b, p)))
    q = add(a, scale(sub(b, a), t))
    return dist(p, q)


def ray_segment_hit(origin: Vec, d: Vec, a: Vec, b: Vec) -> tuple[float, float] | None:
    """Intersect ray origin + s*d (s > 0) with segment a..b.

    Returns (s, t) with t the segment parameter in [0,1], or None.  Parallel
    or behind-the-origin cases return None.
    """
    e = sub(b, a)
    denom = cross(d, e)
    if abs(denom) < 1e-14:
        return None
    # solve origin + s d = a + t e
    ao = sub(a, origin)
    s = cross(ao, e) / denom
    t = cross(ao, d) / denom
    if s <= TOL_GEOM or t < -TOL_GEOM or t > 1.0 + TOL_GEOM:
        return None
    return s, min(1.0, max(0.0, t))


def point_in_convex(p: Vec, poly: list[Vec], tol: float = TOL_GEOM) -> bool:
    """Membership in a convex CCW polygon, closed boundary included."""
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if cross(sub(b, a), sub(p, a)) < -tol:
            return False
    return True
