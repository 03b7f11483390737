"""Per-pose overlay selection: frustum, occlusion, projection, budget.

Given a skier pose and the live annotation set, produce the screen anchors a
heads-up display should draw. A hard budget caps how many survive so the
display stays sparse; hazards outrank slow zones outrank safe zones, and
closer beats farther within a rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .annotation import KIND_HAZARD, Annotation, AnnotationStore, HazardPoint, drape
from .config import (
    DRAPE_LIFT,
    FRUSTUM_EDGE_EPS,
    FRUSTUM_NEAR,
    PRIORITY,
    VIEW_DISTANCE_MAX,
)
from .terrain import TerrainGrid, WorldPoint


@dataclass(frozen=True)
class Pose:
    """Eye position plus view direction; yaw 0 faces +X (east), CCW positive."""

    position: WorldPoint
    yaw: float
    pitch: float
    hfov: float
    aspect: float

    def __post_init__(self):
        if not abs(self.pitch) < math.pi / 2:
            raise ValueError("|pitch| must be below pi/2")
        if not 0 < self.hfov < math.pi:
            raise ValueError("hfov must be in (0, pi)")
        if not self.aspect > 0:
            raise ValueError("aspect must be positive")

    @property
    def vfov(self) -> float:
        return 2.0 * math.atan(math.tan(self.hfov / 2.0) / self.aspect)

    def basis(self) -> tuple[tuple[float, float, float], ...]:
        """Camera axes (forward, right, up) in world coordinates.

        Up is world-up orthogonalized against forward, right completes the
        right-handed screen frame (right = forward x up points screen-right).
        """
        cp = math.cos(self.pitch)
        fwd = (cp * math.cos(self.yaw), cp * math.sin(self.yaw), math.sin(self.pitch))
        # Gram-Schmidt world-up against forward; |pitch| < pi/2 keeps it nonzero.
        upz = (-fwd[0] * fwd[2], -fwd[1] * fwd[2], 1.0 - fwd[2] * fwd[2])
        norm = math.sqrt(upz[0] ** 2 + upz[1] ** 2 + upz[2] ** 2)
        up = (upz[0] / norm, upz[1] / norm, upz[2] / norm)
        right = (
            fwd[1] * up[2] - fwd[2] * up[1],
            fwd[2] * up[0] - fwd[0] * up[2],
            fwd[0] * up[1] - fwd[1] * up[0],
        )
        return fwd, right, up


@dataclass(frozen=True)
class Projected:
    u: float
    v: float
    in_frustum: bool


@dataclass(frozen=True)
class Overlay:
    annotation_id: str
    kind: str
    anchor_world: WorldPoint
    screen_u: float
    screen_v: float
    distance: float
    priority: int

    def sort_key(self) -> tuple:
        return (-self.priority, self.distance, self.annotation_id)


@dataclass(frozen=True)
class OverlaySet:
    pose: Pose
    overlays: tuple[Overlay, ...]
    budget: int


def project(pose: Pose, p: WorldPoint) -> Projected:
    """Pinhole projection to screen (u, v) in [0,1], origin top-left.

    u grows rightward, v downward. A point is in the frustum iff it sits at
    least FRUSTUM_NEAR in front of the eye and lands on the screen square.
    """
    fwd, right, up = pose.basis()
    dx = p.x - pose.position.x
    dy = p.y - pose.position.y
    dz = p.z - pose.position.z
    f = dx * fwd[0] + dy * fwd[1] + dz * fwd[2]
    r = dx * right[0] + dy * right[1] + dz * right[2]
    u_comp = dx * up[0] + dy * up[1] + dz * up[2]
    if f <= 0.0:
        return Projected(math.nan, math.nan, False)
    u = 0.5 + 0.5 * (r / (f * math.tan(pose.hfov / 2.0)))
    v = 0.5 - 0.5 * (u_comp / (f * math.tan(pose.vfov / 2.0)))
    # The edge epsilon keeps points mathematically on the screen border (e.g.
    # exactly 45 degrees off-axis at hfov pi/2) from flickering out on float
    # noise; coordinates are clamped back onto the unit square to match.
    in_frustum = (
        f > FRUSTUM_NEAR
        and abs(u - 0.5) <= 0.5 + FRUSTUM_EDGE_EPS
        and abs(v - 0.5) <= 0.5 + FRUSTUM_EDGE_EPS
    )
    if in_frustum:
        u = min(max(u, 0.0), 1.0)
        v = min(max(v, 0.0), 1.0)
    return Projected(u, v, in_frustum)


def anchor_point(a: Annotation, grid: TerrainGrid, pose: Pose) -> WorldPoint:
    """Where an overlay for this annotation pins to the world.

    Hazards anchor at their lifted point. Zones anchor at the draped-outline
    sample closest to the viewer in XY: the decision happens at the nearest
    edge, not at a centroid that may be far downhill.
    """
    if a.kind == KIND_HAZARD and isinstance(a.geometry, HazardPoint):
        return grid.snap_to_surface(a.geometry.x, a.geometry.y, lift=DRAPE_LIFT)
    outline = drape(a, grid)
    px, py = pose.position.x, pose.position.y
    best = outline.points[0]
    best_d = math.hypot(best.x - px, best.y - py)
    for q in outline.points[1:]:
        d = math.hypot(q.x - px, q.y - py)
        if d < best_d:
            best, best_d = q, d
    return best


def compute_overlays(
    store: AnnotationStore, grid: TerrainGrid, pose: Pose, budget: int
) -> OverlaySet:
    """Select, order, and cap the overlays visible from a pose.

    An annotation survives iff its anchor projects inside the frustum, lies
    within VIEW_DISTANCE_MAX, and has unobstructed line of sight from the eye.
    Survivors sort by (priority desc, distance asc, id asc) and the first
    ``budget`` are kept.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    kept: list[Overlay] = []
    for a in store.live():
        anchor = anchor_point(a, grid, pose)
        distance = pose.position.distance(anchor)
        proj = project(pose, anchor)
        if not proj.in_frustum:
            continue
        if distance > VIEW_DISTANCE_MAX:
            continue
        if not grid.line_of_sight(pose.position, anchor):
            continue
        kept.append(
            Overlay(
                annotation_id=a.id,
                kind=a.kind,
                anchor_world=anchor,
                screen_u=proj.u,
                screen_v=proj.v,
                distance=distance,
                priority=PRIORITY[a.kind],
            )
        )
    kept.sort(key=Overlay.sort_key)
    return OverlaySet(pose=pose, overlays=tuple(kept[:budget]), budget=budget)


def overlay_to_dict(o: Overlay) -> dict:
    return {
        "annotation_id": o.annotation_id,
        "kind": o.kind,
        "anchor": {"x": o.anchor_world.x, "y": o.anchor_world.y, "z": o.anchor_world.z},
        "u": o.screen_u,
        "v": o.screen_v,
        "distance": o.distance,
        "priority": o.priority,
    }


def pose_to_dict(p: Pose) -> dict:
    return {
        "x": p.position.x,
        "y": p.position.y,
        "z": p.position.z,
        "yaw": p.yaw,
        "pitch": p.pitch,
        "hfov": p.hfov,
        "aspect": p.aspect,
    }


def pose_from_dict(doc: dict) -> Pose:
    try:
        return Pose(
            position=WorldPoint(float(doc["x"]), float(doc["y"]), float(doc["z"])),
            yaw=float(doc["yaw"]),
            pitch=float(doc["pitch"]),
            hfov=float(doc["hfov"]),
            aspect=float(doc["aspect"]),
        )
    except (KeyError, TypeError, ValueError) as bad:
        raise ValueError(f"malformed pose: {bad}")


def overlay_set_to_dict(s: OverlaySet) -> dict:
    return {
        "pose": pose_to_dict(s.pose),
        "budget": s.budget,
        "overlays": [overlay_to_dict(o) for o in s.overlays],
    }
