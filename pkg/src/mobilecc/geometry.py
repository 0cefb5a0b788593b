"""Planar geometry behind mobile relay placement.

All coordinates are metres in a flat 2-D field.  Every comparison uses the
shared tolerance ``EPS``: the placement rules put relay nodes exactly on
transmission-range circles, so boundary cases (a point at distance exactly
equal to the range) must count as in range everywhere or the constructions
fall apart.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Sequence

#: Tolerance for geometric comparisons, in metres.  Network scale is tens
#: of metres, so 1e-9 is far below physical meaning.
EPS = 1e-9


class GeometryError(ValueError):
    """Degenerate or invalid geometric input."""


class CoincidentCircles(GeometryError):
    """Two circles share centre and radius: infinitely many intersections."""


class Point(NamedTuple):
    x: float
    y: float


def distance(a: Point, b: Point) -> float:
    """Euclidean distance between two points."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def in_range(a: Point, b: Point, r: float) -> bool:
    """True when ``b`` lies within transmission range ``r`` of ``a``.

    The boundary counts as in range (distance exactly equal to ``r``).
    """
    if r <= 0:
        raise GeometryError(f"transmission range must be positive, got {r}")
    return distance(a, b) <= r + EPS


def point_toward_sink(center: Point, r: float, sink: Point) -> Point:
    """Point on the circle ``(center, r)`` along the line to ``sink``.

    Of the two intersections of the circle with the line through ``center``
    and ``sink``, returns the one closer to the sink.  Axis-aligned inputs
    take the dedicated branches (same x or same y as the sink); anything
    else uses the parametric form ``center + r * unit(sink - center)``.
    The two formulations agree within EPS; both are kept so the branches
    can be cross-checked.
    """
    if r <= 0:
        raise GeometryError(f"radius must be positive, got {r}")
    cx, cy = center
    sx, sy = sink
    if abs(cx - sx) <= EPS and abs(cy - sy) <= EPS:
        raise GeometryError("center coincides with sink: direction undefined")
    if cx == sx:
        return Point(cx, cy + r) if cy < sy else Point(cx, cy - r)
    if cy == sy:
        return Point(cx - r, cy) if cx > sx else Point(cx + r, cy)
    d = math.hypot(sx - cx, sy - cy)
    return Point(cx + r * (sx - cx) / d, cy + r * (sy - cy) / d)


def circle_circle_intersections(
    c1: Point, r1: float, c2: Point, r2: float
) -> list[Point]:
    """Real intersection points of two circles.

    Returns zero points for disjoint or strictly nested circles, one point
    for tangency, two otherwise (sorted by (x, y) for determinism).
    Coincident circles are a distinct degenerate outcome and raise
    :class:`CoincidentCircles` rather than returning a point list.
    """
    if r1 <= 0 or r2 <= 0:
        raise GeometryError("circle radii must be positive")
    d = distance(c1, c2)
    if d <= EPS and abs(r1 - r2) <= EPS:
        raise CoincidentCircles("circles coincide: infinite intersection")
    if d > r1 + r2 + EPS:
        return []
    if d < abs(r1 - r2) - EPS:
        return []
    # Foot of the radical axis at distance a from c1 along the centre line.
    a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    h_sq = r1 * r1 - a * a
    h = math.sqrt(h_sq) if h_sq > 0.0 else 0.0
    ux = (c2[0] - c1[0]) / d
    uy = (c2[1] - c1[1]) / d
    mx = c1[0] + a * ux
    my = c1[1] + a * uy
    if h <= EPS:
        return [Point(mx, my)]
    pts = [Point(mx + h * uy, my - h * ux), Point(mx - h * uy, my + h * ux)]
    pts.sort()
    return pts


def common_point_closest_to_sink(
    centers: Sequence[Point], r: float, sink: Point
) -> Optional[Point]:
    """Best common point of several equal-radius transmission disks.

    For each pair of centers the circle cross-sections are computed, points
    inside every other disk are kept, and of the survivors the one closest
    to the sink wins.  Ties break on lexicographically smaller (x, y) so
    runs stay reproducible.  Returns None when no pairwise cross-section
    point lies in all disks.  Pairs of coincident centers contribute no
    candidate points themselves but still constrain the survivors.
    """
    if len(centers) < 2:
        raise GeometryError("need at least two centers for a common point")
    if r <= 0:
        raise GeometryError(f"radius must be positive, got {r}")
    best: Optional[tuple[float, float, float]] = None
    n = len(centers)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                pts = circle_circle_intersections(centers[i], r, centers[j], r)
            except CoincidentCircles:
                continue
            for p in pts:
                if all(distance(p, c) <= r + EPS for c in centers):
                    key = (distance(p, sink), p[0], p[1])
                    if best is None or key < best:
                        best = key
    if best is None:
        return None
    return Point(best[1], best[2])
