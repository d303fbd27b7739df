"""Oriented 2D box geometry.

Boxes live in the ground plane (bird's eye view). IOU is computed exactly by
clipping one box polygon against the other and taking the shoelace area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

AREA_EPS = 1e-12
AXIS_EPS = 1e-9


class DegenerateAxis(ValueError):
    """Raised when an axis is requested through two (nearly) coincident points."""


def normalize_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.remainder(a, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass(frozen=True)
class OrientedBox2D:
    cx: float
    cy: float
    length: float
    width: float
    heading: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError(f"box extent must be positive, got {self.length}x{self.width}")
        for v in (self.cx, self.cy, self.heading):
            if not math.isfinite(v):
                raise ValueError("box fields must be finite")
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    @property
    def area(self) -> float:
        return self.length * self.width

    def corners(self) -> np.ndarray:
        """Corners in counter-clockwise order, shape (4, 2)."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.center

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized point-in-box test for an (N, 2) array."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        d = np.asarray(pts, dtype=float) - self.center
        u = d[:, 0] * c + d[:, 1] * s
        v = -d[:, 0] * s + d[:, 1] * c
        return (np.abs(u) <= 0.5 * self.length) & (np.abs(v) <= 0.5 * self.width)

    def moved(self, dx: float = 0.0, dy: float = 0.0, dheading: float = 0.0) -> "OrientedBox2D":
        return OrientedBox2D(self.cx + dx, self.cy + dy, self.length, self.width, self.heading + dheading)

    def transformed(self, angle: float, tx: float, ty: float) -> "OrientedBox2D":
        """Apply the rigid motion p -> R(angle) p + t."""
        c, s = math.cos(angle), math.sin(angle)
        return OrientedBox2D(
            c * self.cx - s * self.cy + tx,
            s * self.cx + c * self.cy + ty,
            self.length,
            self.width,
            self.heading + angle,
        )


@dataclass(frozen=True)
class Segment1D:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"segment lo > hi: [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class ProjectedPoint:
    along: float
    lateral: float
    tag: str


@dataclass(frozen=True)
class AxisProjection:
    axis_origin: tuple[float, float]
    axis_dir: tuple[float, float]
    projected_points: tuple[ProjectedPoint, ...] = field(default_factory=tuple)

    def __getitem__(self, tag: str) -> ProjectedPoint:
        for p in self.projected_points:
            if p.tag == tag:
                return p
        raise KeyError(tag)


def polygon_area(poly: Sequence[Sequence[float]]) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    n = len(poly)
    if n < 3:
        return 0.0
    a = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


def clip_polygon(subject: Sequence[Sequence[float]], clipper: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clipping of ``subject`` by the convex CCW polygon ``clipper``."""
    out = [tuple(p) for p in subject]
    m = len(clipper)
    for i in range(m):
        if not out:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % m]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inp, out = out, []
        prev = inp[-1]
        sp = side(prev)
        for cur in inp:
            sc = side(cur)
            if sc >= 0:
                if sp < 0:
                    t = sp / (sp - sc)
                    out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                out.append(cur)
            elif sp >= 0:
                t = sp / (sp - sc)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, sp = cur, sc
    return out


def intersection_area(a: OrientedBox2D, b: OrientedBox2D) -> float:
    # cheap rejection on circumscribed circles
    ra = 0.5 * math.hypot(a.length, a.width)
    rb = 0.5 * math.hypot(b.length, b.width)
    if math.hypot(a.cx - b.cx, a.cy - b.cy) >= ra + rb:
        return 0.0
    inter = clip_polygon(a.corners().tolist(), b.corners().tolist())
    area = abs(polygon_area(inter))
    return area if area >= AREA_EPS else 0.0


def iou2d(a: OrientedBox2D, b: OrientedBox2D) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


def project_onto_axis(points, origin, through) -> AxisProjection:
    """Project tagged points onto the axis running from ``origin`` through ``through``.

    ``points`` is a sequence of ``(x, y, tag)``. Each point gets its signed
    coordinate along the axis (origin at 0) and its unsigned perpendicular
    distance from the axis line.
    """
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = float(through[0]) - ox, float(through[1]) - oy
    norm = math.hypot(dx, dy)
    if norm <= AXIS_EPS:
        raise DegenerateAxis(f"axis endpoints coincide (distance {norm:g} m)")
    ux, uy = dx / norm, dy / norm
    projected = []
    for x, y, tag in points:
        px, py = x - ox, y - oy
        projected.append(ProjectedPoint(px * ux + py * uy, abs(px * uy - py * ux), tag))
    return AxisProjection((ox, oy), (ux, uy), tuple(projected))


def segment_iou(a: Segment1D, b: Segment1D) -> float:
    """1D intersection length over the outer hull span of both segments."""
    span = max(a.hi, b.hi) - min(a.lo, b.lo)
    if span <= 0.0:
        return 0.0
    inter = min(a.hi, b.hi) - max(a.lo, b.lo)
    if inter <= 0.0:
        return 0.0
    if a == b:
        return 1.0
    # rounding can reach 1.0 for nearly equal segments; keep 1.0 for exact equality
    return min(inter / span, math.nextafter(1.0, 0.0))
