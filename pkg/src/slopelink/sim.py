"""Deterministic fall-line skier simulator.

A point mass accelerates down the local gradient against quadratic drag,
with heading blended toward the fall line by an inertia factor. It exists to
drive realistic pose/speed streams through the annotation pipeline without
hardware; it is not a physics model of skiing.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .annotation import (
    KIND_SAFE_ZONE,
    KIND_SLOW_ZONE,
    AnnotationStore,
    ZonePolygon,
    point_in_polygon,
)
from .config import (
    DEFAULT_ASPECT,
    DEFAULT_HFOV,
    EYE_HEIGHT,
    GRAVITY,
    HEADING_JITTER,
    REST_SPEED,
    SIM_DT,
    SIM_DRAG,
    SIM_INERTIA,
    SIM_V_MAX,
)
from .terrain import OutOfBoundsError, TerrainGrid, WorldPoint
from .viewmodel import Pose


@dataclass(frozen=True)
class SimConfig:
    start_x: float
    start_y: float
    dt: float = SIM_DT
    v_max: float = SIM_V_MAX
    drag: float = SIM_DRAG
    inertia: float = SIM_INERTIA
    seed: int = 0
    max_steps: int = 600
    ignore_zones: bool = False  # simulate a non-compliant skier

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.inertia <= 1:
            raise ValueError("inertia must be in [0, 1]")
        if not self.drag > 0:
            raise ValueError("drag must be positive")


@dataclass(frozen=True)
class SimState:
    position: WorldPoint  # on the surface; the pose eye sits EYE_HEIGHT above
    heading: tuple[float, float]  # unit XY
    speed: float
    step_index: int
    pitch: float = 0.0  # -slope angle of the step that produced this state


@dataclass(frozen=True)
class SimSample:
    t_ms: int
    pose: Pose
    speed: float


def _slow_limit(store: AnnotationStore, x: float, y: float) -> float | None:
    """Tightest speed limit among live slow zones containing (x, y)."""
    limit = None
    for a in store.live():
        if a.kind != KIND_SLOW_ZONE or not isinstance(a.geometry, ZonePolygon):
            continue
        if point_in_polygon(x, y, a.geometry.vertices):
            if limit is None or a.speed_limit < limit:
                limit = a.speed_limit
    return limit


def _pose_for(state: SimState) -> Pose:
    hx, hy = state.heading
    eye = WorldPoint(state.position.x, state.position.y, state.position.z + EYE_HEIGHT)
    return Pose(eye, math.atan2(hy, hx), state.pitch, DEFAULT_HFOV, DEFAULT_ASPECT)


def sim_step(
    state: SimState, grid: TerrainGrid, store: AnnotationStore, cfg: SimConfig
) -> SimState:
    """One dt of fall-line descent; raises OutOfBoundsError at the grid edge."""
    x, y = state.position.x, state.position.y
    gx, gy = grid.gradient_at(x, y)
    gnorm = math.hypot(gx, gy)

    hx, hy = state.heading
    if gnorm > 1e-12:
        fx, fy = -gx / gnorm, -gy / gnorm
        bx = cfg.inertia * hx + (1.0 - cfg.inertia) * fx
        by = cfg.inertia * hy + (1.0 - cfg.inertia) * fy
        bnorm = math.hypot(bx, by)
        if bnorm > 1e-12:
            hx, hy = bx / bnorm, by / bnorm

    theta = math.atan(gnorm)
    speed = state.speed + cfg.dt * (GRAVITY * math.sin(theta) - cfg.drag * state.speed**2)
    speed = min(max(speed, 0.0), cfg.v_max)
    if not cfg.ignore_zones:
        limit = _slow_limit(store, x, y)
        if limit is not None:
            speed = min(speed, limit)

    nx = x + cfg.dt * speed * hx
    ny = y + cfg.dt * speed * hy
    surface = grid.snap_to_surface(nx, ny)  # raises OutOfBoundsError past the edge
    return SimState(
        position=surface,
        heading=(hx, hy),
        speed=speed,
        step_index=state.step_index + 1,
        pitch=-theta,
    )


def initial_state(grid: TerrainGrid, store: AnnotationStore, cfg: SimConfig) -> SimState:
    """Start at rest, headed down the fall line, tilted by a seeded jitter."""
    gx, gy = grid.gradient_at(cfg.start_x, cfg.start_y)
    gnorm = math.hypot(gx, gy)
    base = math.atan2(-gy, -gx) if gnorm > 1e-12 else 0.0
    angle = base + random.Random(cfg.seed).uniform(-HEADING_JITTER, HEADING_JITTER)
    return SimState(
        position=grid.snap_to_surface(cfg.start_x, cfg.start_y),
        heading=(math.cos(angle), math.sin(angle)),
        speed=0.0,
        step_index=0,
        pitch=-math.atan(gnorm),
    )


def run_sim(grid: TerrainGrid, store: AnnotationStore, cfg: SimConfig) -> list[SimSample]:
    """Descend until max_steps, the grid edge, or at rest inside a safe zone."""
    state = initial_state(grid, store, cfg)

    def sample(state: SimState) -> SimSample:
        t_ms = round(state.step_index * cfg.dt * 1000.0)
        return SimSample(t_ms=t_ms, pose=_pose_for(state), speed=state.speed)

    samples = [sample(state)]
    for _ in range(cfg.max_steps):
        try:
            state = sim_step(state, grid, store, cfg)
        except OutOfBoundsError:
            break
        samples.append(sample(state))
        if state.speed < REST_SPEED and _in_safe_zone(store, state.position):
            break
    return samples


def _in_safe_zone(store: AnnotationStore, p: WorldPoint) -> bool:
    for a in store.live():
        if a.kind == KIND_SAFE_ZONE and isinstance(a.geometry, ZonePolygon):
            if point_in_polygon(p.x, p.y, a.geometry.vertices):
                return True
    return False


def sample_to_trace_dict(s: SimSample) -> dict:
    """JSON Lines trace record; position is the eye, not the surface."""
    return {
        "t_ms": s.t_ms,
        "x": s.pose.position.x,
        "y": s.pose.position.y,
        "z": s.pose.position.z,
        "yaw": s.pose.yaw,
        "pitch": s.pose.pitch,
        "speed": s.speed,
    }
