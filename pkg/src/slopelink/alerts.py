"""Per-skier alert tracking over a pose stream.

Zone membership uses hysteresis: enter on the polygon itself, leave only once
HYSTERESIS_MARGIN meters clear of its boundary, so GPS-scale jitter at an
edge cannot flap enter/exit events. Hazard proximity and speeding alerts are
rate-limited per annotation by ALERT_COOLDOWN_MS.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .annotation import (
    KIND_SAFE_ZONE,
    KIND_SLOW_ZONE,
    AnnotationStore,
    HazardPoint,
    ZonePolygon,
    point_in_polygon,
    point_to_boundary_distance,
)
from .config import ALERT_COOLDOWN_MS, HYSTERESIS_MARGIN
from .terrain import OutOfBoundsError, TerrainGrid
from .viewmodel import Pose

HAZARD_PROXIMITY = "HazardProximity"
SLOW_ZONE_ENTERED = "SlowZoneEntered"
SLOW_ZONE_EXITED = "SlowZoneExited"
SPEED_EXCEEDED = "SpeedExceeded"
SAFE_ZONE_ARRIVED = "SafeZoneArrived"


@dataclass(frozen=True)
class AlertEvent:
    kind: str
    annotation_id: str
    skier_id: str
    t_ms: int
    detail: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "annotation_id": self.annotation_id,
            "skier_id": self.skier_id,
            "t_ms": self.t_ms,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class SkierTrack:
    skier_id: str
    pose: Pose
    speed: float
    t_ms: int
    membership: frozenset[str] = frozenset()
    last_alert_at: dict = None  # annotation_id -> t_ms of last rate-limited alert

    def __post_init__(self):
        if self.last_alert_at is None:
            object.__setattr__(self, "last_alert_at", {})


def step_alerts(
    track: SkierTrack,
    store: AnnotationStore,
    grid: TerrainGrid,
    new_pose: Pose,
    new_speed: float,
    t_ms: int,
) -> tuple[SkierTrack, list[AlertEvent]]:
    """Advance one pose sample; returns the new track and fired events.

    Event order within a step is fixed (zone transitions, then hazard
    proximity, then speeding, annotations id-sorted inside each phase) so a
    replayed stream reproduces the exact event list.
    """
    if t_ms < track.t_ms:
        raise ValueError("pose timestamp precedes the track's last sample")
    px, py = new_pose.position.x, new_pose.position.y
    if not grid.contains_xy(px, py):
        raise OutOfBoundsError(f"pose ({px}, {py}) outside terrain")

    live = {a.id: a for a in store.live()}
    events: list[AlertEvent] = []
    cooldowns = dict(track.last_alert_at)

    # Zone membership with hysteresis. Stale ids (zone deleted mid-session)
    # drop out silently: an exit event would point at a dead annotation.
    membership = {z for z in track.membership if z in live and isinstance(
        live[z].geometry, ZonePolygon)}
    zones = sorted(
        (a for a in live.values() if isinstance(a.geometry, ZonePolygon)), key=lambda a: a.id
    )
    for a in zones:
        verts = a.geometry.vertices
        inside_now = point_in_polygon(px, py, verts)
        if a.id not in membership:
            if inside_now:
                membership.add(a.id)
                if a.kind == KIND_SLOW_ZONE:
                    events.append(AlertEvent(
                        SLOW_ZONE_ENTERED, a.id, track.skier_id, t_ms,
                        f"entered slow zone (limit {a.speed_limit:g} m/s)",
                    ))
                elif a.kind == KIND_SAFE_ZONE:
                    events.append(AlertEvent(
                        SAFE_ZONE_ARRIVED, a.id, track.skier_id, t_ms, "arrived in safe zone",
                    ))
        else:
            clear = (not inside_now) and point_to_boundary_distance(
                px, py, verts
            ) >= HYSTERESIS_MARGIN
            if clear:
                membership.discard(a.id)
                if a.kind == KIND_SLOW_ZONE:
                    events.append(AlertEvent(
                        SLOW_ZONE_EXITED, a.id, track.skier_id, t_ms, "left slow zone",
                    ))

    # Hazard proximity, once per cooldown window per hazard.
    hazards = sorted(
        (a for a in live.values() if isinstance(a.geometry, HazardPoint)), key=lambda a: a.id
    )
    for a in hazards:
        geom = a.geometry
        d = ((px - geom.x) ** 2 + (py - geom.y) ** 2) ** 0.5
        if d <= geom.radius and t_ms - cooldowns.get(a.id, -ALERT_COOLDOWN_MS) >= ALERT_COOLDOWN_MS:
            cooldowns[a.id] = t_ms
            events.append(AlertEvent(
                HAZARD_PROXIMITY, a.id, track.skier_id, t_ms,
                f"{d:.1f} m from hazard (radius {geom.radius:g} m)",
            ))

    # Speeding inside a slow zone, same cooldown discipline per zone.
    for a in zones:
        if a.kind != KIND_SLOW_ZONE or a.id not in membership:
            continue
        if new_speed > a.speed_limit and t_ms - cooldowns.get(
            a.id, -ALERT_COOLDOWN_MS
        ) >= ALERT_COOLDOWN_MS:
            cooldowns[a.id] = t_ms
            events.append(AlertEvent(
                SPEED_EXCEEDED, a.id, track.skier_id, t_ms,
                f"speed {new_speed:.2f} m/s over limit {a.speed_limit:g} m/s",
            ))

    new_track = replace(
        track,
        pose=new_pose,
        speed=new_speed,
        t_ms=t_ms,
        membership=frozenset(membership),
        last_alert_at=cooldowns,
    )
    return new_track, events


def fresh_track(skier_id: str, pose: Pose, speed: float = 0.0, t_ms: int = 0) -> SkierTrack:
    return SkierTrack(skier_id=skier_id, pose=pose, speed=speed, t_ms=t_ms)


def track_to_dict(track: SkierTrack) -> dict:
    """Canonical form for replay comparison and the wire."""
    from .viewmodel import pose_to_dict

    return {
        "skier_id": track.skier_id,
        "pose": pose_to_dict(track.pose),
        "speed": track.speed,
        "t_ms": track.t_ms,
        "membership": sorted(track.membership),
        "last_alert_at": {k: track.last_alert_at[k] for k in sorted(track.last_alert_at)},
    }
