"""Guide annotations: hazard points and draped zones with LWW revisions.

Annotations replicate between guide and skiers under last-writer-wins keyed
by ``(revision, author_id)``; deletes travel as tombstones so any delivery
order converges. Zone geometry is a simple 2D polygon draped onto the terrain
surface for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .config import DRAPE_LIFT, DRAPE_MAX_SPACING, HAZARD_DEFAULT_RADIUS
from .terrain import TerrainGrid, WorldPoint

KIND_HAZARD = "hazard"
KIND_SLOW_ZONE = "slow_zone"
KIND_SAFE_ZONE = "safe_zone"
KINDS = (KIND_HAZARD, KIND_SLOW_ZONE, KIND_SAFE_ZONE)

XY = tuple[float, float]


class AnnotationSchemaError(ValueError):
    """Raised when an annotation document is structurally malformed."""


class InvalidAnnotationError(Exception):
    """Raised when an operation needs a valid, live annotation and got neither."""


@dataclass(frozen=True)
class HazardPoint:
    x: float
    y: float
    radius: float = HAZARD_DEFAULT_RADIUS


@dataclass(frozen=True)
class ZonePolygon:
    vertices: tuple[XY, ...]

    def edges(self) -> Iterator[tuple[XY, XY]]:
        n = len(self.vertices)
        for k in range(n):
            yield self.vertices[k], self.vertices[(k + 1) % n]


@dataclass(frozen=True)
class Annotation:
    id: str
    kind: str
    geometry: HazardPoint | ZonePolygon
    label: str = ""
    speed_limit: Optional[float] = None
    revision: int = 1
    author_id: str = ""
    created_at: int = 0
    deleted: bool = False

    @property
    def lww_key(self) -> tuple[int, str]:
        return (self.revision, self.author_id)

    def tombstone(self, revision: int, author_id: str, created_at: int = 0) -> "Annotation":
        return replace(
            self, revision=revision, author_id=author_id, created_at=created_at, deleted=True
        )


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


@dataclass(frozen=True)
class DrapedOutline:
    annotation_id: str
    points: tuple[WorldPoint, ...]
    closed: bool


# -- polygon predicates ------------------------------------------------------


def _orient(ax, ay, bx, by, cx, cy) -> float:
    """Twice the signed area of triangle abc (>0 means c left of a->b)."""
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    if _orient(ax, ay, bx, by, px, py) != 0.0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def point_in_polygon(px: float, py: float, vertices) -> bool:
    """Even-odd containment with the closed-region convention.

    Boundary points count as inside: at a zone edge, ambiguity must resolve
    to the cautious state.
    """
    n = len(vertices)
    for k in range(n):
        ax, ay = vertices[k]
        bx, by = vertices[(k + 1) % n]
        if _on_segment(px, py, ax, ay, bx, by):
            return True
    inside = False
    for k in range(n):
        ax, ay = vertices[k]
        bx, by = vertices[(k + 1) % n]
        # Half-open span rule keeps vertex crossings counted exactly once.
        if (ay <= py) != (by <= py):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_cross:
                inside = not inside
    return inside


def _segments_intersect(a1: XY, a2: XY, b1: XY, b2: XY) -> bool:
    """Closed-segment intersection via orientation signs."""
    d1 = _orient(*b1, *b2, *a1)
    d2 = _orient(*b1, *b2, *a2)
    d3 = _orient(*a1, *a2, *b1)
    d4 = _orient(*a1, *a2, *b2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0.0 and _on_segment(*a1, *b1, *b2):
        return True
    if d2 == 0.0 and _on_segment(*a2, *b1, *b2):
        return True
    if d3 == 0.0 and _on_segment(*b1, *a1, *a2):
        return True
    if d4 == 0.0 and _on_segment(*b2, *a1, *a2):
        return True
    return False


def polygon_is_simple(vertices) -> bool:
    """No self-intersections; adjacent edges may only meet at the shared vertex."""
    n = len(vertices)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = vertices[i], vertices[(i + 1) % n]
        if a1 == a2:
            return False
        for j in range(i + 1, n):
            b1, b2 = vertices[j], vertices[(j + 1) % n]
            if j == (i + 1) % n:
                # Consecutive edges share a2 == b1; a fold-back over the
                # shared vertex is the only way they can still overlap.
                if _orient(*a1, *a2, *b2) == 0.0 and (
                    (a1[0] - a2[0]) * (b2[0] - a2[0]) + (a1[1] - a2[1]) * (b2[1] - a2[1])
                ) > 0.0:
                    return False
                continue
            if i == 0 and j == n - 1:
                # Closing edge shares a1 == b2; same fold-back check.
                if _orient(*b1, *b2, *a2) == 0.0 and (
                    (b1[0] - b2[0]) * (a2[0] - b2[0]) + (b1[1] - b2[1]) * (a2[1] - b2[1])
                ) > 0.0:
                    return False
                continue
            if _segments_intersect(a1, a2, b1, b2):
                return False
    return True


def polygon_area(vertices) -> float:
    total = 0.0
    n = len(vertices)
    for k in range(n):
        ax, ay = vertices[k]
        bx, by = vertices[(k + 1) % n]
        total += ax * by - bx * ay
    return abs(total) / 2.0


def point_to_boundary_distance(px: float, py: float, vertices) -> float:
    """XY distance from a point to the polygon outline."""
    best = math.inf
    n = len(vertices)
    for k in range(n):
        ax, ay = vertices[k]
        bx, by = vertices[(k + 1) % n]
        dx, dy = bx - ax, by - ay
        denom = dx * dx + dy * dy
        if denom == 0.0:
            t = 0.0
        else:
            t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
        best = min(best, math.hypot(px - (ax + t * dx), py - (ay + t * dy)))
    return best


# -- validation ---------------------------------------------------------------


def validate_annotation(a: Annotation, grid: TerrainGrid) -> list[Violation]:
    """Every violated invariant, as data; an empty list means valid.

    Tombstones validate trivially: their geometry is already dead weight.
    """
    if a.deleted:
        return []
    out: list[Violation] = []
    if a.kind not in KINDS:
        out.append(Violation("UnknownKind", f"kind {a.kind!r}"))
        return out
    if a.revision < 1:
        out.append(Violation("BadRevision", f"revision {a.revision} must be >= 1"))

    if a.kind == KIND_SLOW_ZONE:
        if a.speed_limit is None:
            out.append(Violation("SpeedLimitMissing", "slow zones need a speed limit"))
        elif not (a.speed_limit > 0):
            out.append(Violation("SpeedLimitNotPositive", f"speed limit {a.speed_limit}"))
    elif a.speed_limit is not None:
        out.append(Violation("SpeedLimitUnexpected", f"{a.kind} must not carry a speed limit"))

    if a.kind == KIND_HAZARD:
        if not isinstance(a.geometry, HazardPoint):
            out.append(Violation("GeometryMismatch", "hazard needs a point geometry"))
            return out
        if not (a.geometry.radius > 0):
            out.append(Violation("NonPositiveRadius", f"radius {a.geometry.radius}"))
        if not grid.contains_xy(a.geometry.x, a.geometry.y):
            out.append(
                Violation("OutOfTerrainBounds", f"point ({a.geometry.x}, {a.geometry.y})")
            )
        return out

    if not isinstance(a.geometry, ZonePolygon):
        out.append(Violation("GeometryMismatch", "zone needs a polygon geometry"))
        return out
    verts = a.geometry.vertices
    if len(verts) < 3:
        out.append(Violation("TooFewVertices", f"{len(verts)} vertices, need >= 3"))
        return out
    if not polygon_is_simple(verts):
        out.append(Violation("SelfIntersecting", "polygon edges cross"))
    if polygon_area(verts) == 0.0:
        out.append(Violation("DegenerateArea", "polygon has zero area"))
    for vx, vy in verts:
        if not grid.contains_xy(vx, vy):
            out.append(Violation("OutOfTerrainBounds", f"vertex ({vx}, {vy})"))
            break
    return out


# -- draping -------------------------------------------------------------------


def drape(a: Annotation, grid: TerrainGrid) -> DrapedOutline:
    """Project annotation geometry onto the surface with a small lift.

    Zone boundaries are resampled so consecutive samples are at most
    DRAPE_MAX_SPACING apart in XY (closing edge included); hazards become a
    single snapped point.
    """
    if a.deleted:
        raise InvalidAnnotationError(f"annotation {a.id} is a tombstone")
    violations = validate_annotation(a, grid)
    if violations:
        raise InvalidAnnotationError(f"annotation {a.id}: {violations[0]}")

    if a.kind == KIND_HAZARD:
        assert isinstance(a.geometry, HazardPoint)
        p = grid.snap_to_surface(a.geometry.x, a.geometry.y, lift=DRAPE_LIFT)
        return DrapedOutline(a.id, (p,), closed=False)

    assert isinstance(a.geometry, ZonePolygon)
    points: list[WorldPoint] = []
    for (ax, ay), (bx, by) in a.geometry.edges():
        length = math.hypot(bx - ax, by - ay)
        pieces = max(1, int(math.ceil(length / DRAPE_MAX_SPACING)))
        for k in range(pieces):  # start vertex plus intermediates; next edge owns its start
            t = k / pieces
            points.append(
                grid.snap_to_surface(ax + t * (bx - ax), ay + t * (by - ay), lift=DRAPE_LIFT)
            )
    return DrapedOutline(a.id, tuple(points), closed=True)


# -- store ----------------------------------------------------------------------


@dataclass
class AnnotationStore:
    """Replicated annotation set; mutation must be serialized by the owner."""

    entries: dict[str, Annotation] = field(default_factory=dict)

    def merge(self, incoming: Annotation) -> bool:
        """Last-writer-wins by (revision, author_id); returns True if applied."""
        current = self.entries.get(incoming.id)
        if current is not None and incoming.lww_key <= current.lww_key:
            return False
        self.entries[incoming.id] = incoming
        return True

    def live(self) -> list[Annotation]:
        """Non-tombstone annotations, id-sorted for deterministic iteration."""
        return [a for _, a in sorted(self.entries.items()) if not a.deleted]

    def get(self, annotation_id: str) -> Optional[Annotation]:
        return self.entries.get(annotation_id)

    def snapshot(self) -> "AnnotationStore":
        """Immutable-by-convention copy to hand to concurrent readers."""
        return AnnotationStore(dict(self.entries))


# -- JSON forms -------------------------------------------------------------------


def annotation_to_dict(a: Annotation) -> dict:
    doc: dict = {
        "id": a.id,
        "kind": a.kind,
        "label": a.label,
        "revision": a.revision,
        "author_id": a.author_id,
        "created_at": a.created_at,
        "deleted": a.deleted,
    }
    if isinstance(a.geometry, HazardPoint):
        doc["geometry"] = {
            "point": {"x": a.geometry.x, "y": a.geometry.y, "radius": a.geometry.radius}
        }
    else:
        doc["geometry"] = {"polygon": [[vx, vy] for vx, vy in a.geometry.vertices]}
    if a.speed_limit is not None:
        doc["speed_limit"] = a.speed_limit
    return doc


def annotation_from_dict(doc: dict) -> Annotation:
    if not isinstance(doc, dict):
        raise AnnotationSchemaError("annotation must be an object")
    try:
        ann_id = doc["id"]
        kind = doc["kind"]
        geometry = doc["geometry"]
        revision = doc["revision"]
        author_id = doc["author_id"]
    except KeyError as missing:
        raise AnnotationSchemaError(f"annotation missing field {missing}")
    if not isinstance(ann_id, str) or not ann_id:
        raise AnnotationSchemaError("id must be a non-empty string")
    if kind not in KINDS:
        raise AnnotationSchemaError(f"unknown kind {kind!r}")
    if not isinstance(revision, int) or isinstance(revision, bool):
        raise AnnotationSchemaError("revision must be an integer")
    if not isinstance(author_id, str):
        raise AnnotationSchemaError("author_id must be a string")

    if not isinstance(geometry, dict):
        raise AnnotationSchemaError("geometry must be an object")
    if "point" in geometry:
        pt = geometry["point"]
        try:
            geom: HazardPoint | ZonePolygon = HazardPoint(
                float(pt["x"]), float(pt["y"]), float(pt.get("radius", HAZARD_DEFAULT_RADIUS))
            )
        except (TypeError, KeyError, ValueError):
            raise AnnotationSchemaError("point geometry needs numeric x and y")
    elif "polygon" in geometry:
        raw = geometry["polygon"]
        if not isinstance(raw, list):
            raise AnnotationSchemaError("polygon must be a vertex list")
        try:
            geom = ZonePolygon(tuple((float(vx), float(vy)) for vx, vy in raw))
        except (TypeError, ValueError):
            raise AnnotationSchemaError("polygon vertices must be [x, y] pairs")
    else:
        raise AnnotationSchemaError("geometry needs a point or a polygon")

    speed_limit = doc.get("speed_limit")
    if speed_limit is not None:
        try:
            speed_limit = float(speed_limit)
        except (TypeError, ValueError):
            raise AnnotationSchemaError("speed_limit must be numeric")

    return Annotation(
        id=ann_id,
        kind=kind,
        geometry=geom,
        label=str(doc.get("label", "")),
        speed_limit=speed_limit,
        revision=revision,
        author_id=author_id,
        created_at=int(doc.get("created_at", 0)),
        deleted=bool(doc.get("deleted", False)),
    )


def store_to_document(store: AnnotationStore) -> dict:
    """Persistence snapshot: the CLI input format and the on-disk form."""
    return {
        "version": 1,
        "annotations": [annotation_to_dict(a) for _, a in sorted(store.entries.items())],
    }


def store_from_document(doc: dict) -> AnnotationStore:
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise AnnotationSchemaError("annotation document must have version 1")
    annotations = doc.get("annotations")
    if not isinstance(annotations, list):
        raise AnnotationSchemaError("annotation document needs an annotations list")
    store = AnnotationStore()
    for raw in annotations:
        store.merge(annotation_from_dict(raw))
    return store
