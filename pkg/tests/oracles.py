"""Independent reference implementations used to check the real ones.

Everything here is deliberately brute force and coded along a different route
than the production code: winding numbers instead of even-odd crossing,
parametric segment solves instead of orientation predicates, dense ray
sampling instead of per-cell minimization, and naive sort-and-filter overlay
selection. Keep it that way.
"""

from __future__ import annotations

import math

from slopelink.terrain import TerrainGrid, WorldPoint


# -- polygons --------------------------------------------------------------


def on_segment(px, py, ax, ay, bx, by) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if cross != 0.0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def winding_inside(px: float, py: float, poly) -> bool:
    """Winding-number containment, boundary counted as inside."""
    n = len(poly)
    for k in range(n):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % n]
        if on_segment(px, py, ax, ay, bx, by):
            return True
    wn = 0
    for k in range(n):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % n]
        if ay <= py:
            if by > py and (bx - ax) * (py - ay) - (px - ax) * (by - ay) > 0:
                wn += 1
        elif by <= py and (bx - ax) * (py - ay) - (px - ax) * (by - ay) < 0:
            wn -= 1
    return wn != 0


def _segments_cross_parametric(p1, p2, p3, p4, ignore_shared_endpoint: bool) -> bool:
    """Solve p1 + s(p2-p1) = p3 + t(p4-p3) with floats; cross if s,t in [0,1]."""
    x1, y1 = p1
    x2, y2 = p2
    x3, y3 = p3
    x4, y4 = p4
    dx1, dy1 = x2 - x1, y2 - y1
    dx2, dy2 = x4 - x3, y4 - y3
    denom = dx1 * dy2 - dy1 * dx2
    if denom == 0.0:
        # Parallel: overlap iff collinear and projections intersect in more
        # than a shared endpoint.
        if (x3 - x1) * dy1 - (y3 - y1) * dx1 != 0.0:
            return False
        axis = 0 if abs(dx1) >= abs(dy1) else 1
        i1 = sorted((p1[axis], p2[axis]))
        i2 = sorted((p3[axis], p4[axis]))
        lo = max(i1[0], i2[0])
        hi = min(i1[1], i2[1])
        if lo > hi:
            return False
        if lo == hi and ignore_shared_endpoint:
            return False
        return True
    s = ((x3 - x1) * dy2 - (y3 - y1) * dx2) / denom
    t = ((x3 - x1) * dy1 - (y3 - y1) * dx1) / denom
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        return False
    if ignore_shared_endpoint and (s in (0.0, 1.0)) and (t in (0.0, 1.0)):
        return False
    return True


def polygon_self_intersects(poly) -> bool:
    """All-pairs edge test; adjacent edges may only touch at the shared vertex."""
    n = len(poly)
    for i in range(n):
        a1 = poly[i]
        a2 = poly[(i + 1) % n]
        if a1 == a2:
            return True  # zero-length edge
        for j in range(i + 1, n):
            adjacent = (j == (i + 1) % n) or ((j + 1) % n == i) or (i == j)
            b1 = poly[j]
            b2 = poly[(j + 1) % n]
            if _segments_cross_parametric(a1, a2, b1, b2, ignore_shared_endpoint=adjacent):
                return True
    return False


def point_polygon_boundary_distance(px, py, poly) -> float:
    best = math.inf
    n = len(poly)
    for k in range(n):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % n]
        dx, dy = bx - ax, by - ay
        denom = dx * dx + dy * dy
        t = 0.0 if denom == 0.0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
        best = min(best, math.hypot(px - (ax + t * dx), py - (ay + t * dy)))
    return best


# -- planes ---------------------------------------------------------------


def plane(a: float, b: float, c: float):
    """z = a*x + b*y + c as a callable, plus its analytic gradient."""

    def fn(x: float, y: float) -> float:
        return a * x + b * y + c

    return fn


def plane_grid(a, b, c, ncols=11, nrows=11, origin_x=0.0, origin_y=0.0, cellsize=10.0):
    return TerrainGrid.from_function(ncols, nrows, origin_x, origin_y, cellsize, plane(a, b, c))


# -- polygon generators ------------------------------------------------------


def random_simple_polygon(rng, n_min=3, n_max=10, cx=0.0, cy=0.0, r_max=20.0):
    """Star-shaped polygon: random radii at sorted angles around a center.

    Simplicity is guaranteed only when every circular gap between consecutive
    angles is below pi (each edge then owns a disjoint angular wedge), so
    angle sets violating that are re-drawn.
    """
    n = rng.randint(n_min, n_max)
    while True:
        angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
        gaps = [b - a for a, b in zip(angles, angles[1:])]
        gaps.append(angles[0] + 2 * math.pi - angles[-1])
        if min(gaps) > 1e-3 and max(gaps) < math.pi - 1e-3:
            break
    points = []
    for a in angles:
        r = rng.uniform(1.0, r_max)
        points.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    return tuple(points)


def random_polygon(rng, n_min=4, n_max=10, lo=-20.0, hi=20.0):
    """Random vertex order; usually self-intersecting, occasionally not."""
    n = rng.randint(n_min, n_max)
    return tuple((rng.uniform(lo, hi), rng.uniform(lo, hi)) for _ in range(n))


# -- pinhole projection ------------------------------------------------------


def matrix_project(pose, p):
    """Projection via explicit numpy rotation matrices (independent route).

    Camera axes come from Rz(yaw) @ Ry(-pitch) applied to the identity frame
    (forward +X, right -Y, up +Z), not from Gram-Schmidt.
    """
    import numpy as np

    cy, sy = math.cos(pose.yaw), math.sin(pose.yaw)
    cp, sp = math.cos(pose.pitch), math.sin(pose.pitch)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    rot = rz @ ry
    forward = rot @ np.array([1.0, 0.0, 0.0])
    right = rot @ np.array([0.0, -1.0, 0.0])
    up = rot @ np.array([0.0, 0.0, 1.0])
    d = np.array([p.x - pose.position.x, p.y - pose.position.y, p.z - pose.position.z])
    f = float(forward @ d)
    if f <= 0.0:
        return math.nan, math.nan, False
    u = 0.5 + 0.5 * float(right @ d) / (f * math.tan(pose.hfov / 2.0))
    v = 0.5 - 0.5 * float(up @ d) / (f * math.tan(pose.vfov / 2.0))
    return u, v, (f > 0.1 and abs(u - 0.5) <= 0.5 and abs(v - 0.5) <= 0.5)


def select_overlays_bruteforce(pose, grid, candidates, budget, view_max=2000.0):
    """Naive filter-sort-truncate over (annotation_id, priority, anchor) triples."""
    rows = []
    for ann_id, priority, anchor in candidates:
        u, v, ok = matrix_project(pose, anchor)
        if not ok:
            continue
        dist = math.sqrt(
            (anchor.x - pose.position.x) ** 2
            + (anchor.y - pose.position.y) ** 2
            + (anchor.z - pose.position.z) ** 2
        )
        if dist > view_max:
            continue
        if not dense_los(grid, pose.position, anchor):
            continue
        rows.append((-priority, dist, ann_id))
    rows.sort()
    return [ann_id for _, _, ann_id in rows[:budget]]


# -- line of sight ---------------------------------------------------------


def dense_los(grid: TerrainGrid, eye: WorldPoint, target: WorldPoint, eps: float = 0.05,
              divisor: float = 10.0) -> bool:
    """Sampled visibility at step cellsize/divisor, endpoints excluded."""
    dist = eye.distance(target)
    if dist == 0.0:
        return True
    n = max(2, int(math.ceil(dist / (grid.cellsize / divisor))))
    for k in range(1, n):
        t = k / n
        x = eye.x + t * (target.x - eye.x)
        y = eye.y + t * (target.y - eye.y)
        z = eye.z + t * (target.z - eye.z)
        if z < grid.elevation_at(x, y) - eps:
            return False
    return True
