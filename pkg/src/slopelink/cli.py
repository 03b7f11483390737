"""Operator entry points: serve, validate, simulate, view.

Exit codes are a stable contract: 0 success, 1 validation failure,
2 environment/input error. Everything except ``serve`` is deterministic for
identical inputs; ``serve`` takes no wall-clock decisions in session logic
(timestamps ride on client envelopes), so its log replays bit-exactly.
"""

from __future__ import annotations

import json
import logging
import os
import socket
import sys
from pathlib import Path

import click

from .alerts import fresh_track, step_alerts
from .annotation import AnnotationSchemaError, store_from_document, validate_annotation
from .config import DEFAULT_ASPECT, DEFAULT_HFOV, DEFAULT_OVERLAY_BUDGET, EYE_HEIGHT
from .protocol import CorruptLogError, canonical_json
from .sim import SimConfig, run_sim, sample_to_trace_dict
from .terrain import OutOfBoundsError, TerrainError, WorldPoint, load_terrain
from .viewmodel import Pose, compute_overlays, overlay_set_to_dict

log = logging.getLogger("slopelink.cli")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2


def _configure_logging() -> None:
    level = os.environ.get("SLOPELINK_LOG_LEVEL", "info").lower()
    chosen = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        level, logging.INFO
    )
    logging.basicConfig(level=chosen, format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str, code: int) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _load_terrain_file(path: Path):
    try:
        return load_terrain(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as bad:
        _fail(f"cannot read terrain: {bad}", EXIT_INPUT)
    except TerrainError as bad:
        _fail(f"bad terrain file: {bad}", EXIT_INPUT)


def _load_annotation_file(path: Path):
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return store_from_document(doc)
    except (OSError, UnicodeDecodeError) as bad:
        _fail(f"cannot read annotations: {bad}", EXIT_INPUT)
    except (json.JSONDecodeError, AnnotationSchemaError) as bad:
        _fail(f"bad annotation file: {bad}", EXIT_INPUT)


def _parse_floats(raw: str, count: int, what: str) -> list[float]:
    parts = raw.split(",")
    if len(parts) != count:
        _fail(f"{what} must be {count} comma-separated numbers, got {raw!r}", EXIT_INPUT)
    try:
        return [float(p) for p in parts]
    except ValueError:
        _fail(f"{what} must be numeric, got {raw!r}", EXIT_INPUT)


def _validated_store(grid, annotations_path: Path):
    """Load and insist on a fully valid annotation set (exit 2 otherwise)."""
    store = _load_annotation_file(annotations_path)
    for annotation in store.entries.values():
        bad = validate_annotation(annotation, grid)
        if bad:
            _fail(f"annotation {annotation.id}: {bad[0]}", EXIT_INPUT)
    return store


@click.group()
def main() -> None:
    """Terrain-anchored guide-to-skier annotation sync."""
    _configure_logging()


@main.command()
@click.option("--terrain", "terrain_path", type=click.Path(path_type=Path), required=True)
@click.option("--annotations", "annotations_path", type=click.Path(path_type=Path), required=True)
def validate(terrain_path: Path, annotations_path: Path) -> None:
    """Check that the terrain loads and every annotation is valid."""
    grid = _load_terrain_file(terrain_path)
    store = _load_annotation_file(annotations_path)
    problems = []
    for annotation in store.entries.values():
        for violation in validate_annotation(annotation, grid):
            problems.append(f"annotation {annotation.id}: {violation}")
    if problems:
        for line in problems:
            click.echo(line)
        sys.exit(EXIT_INVALID)
    click.echo("OK")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--terrain", "terrain_path", type=click.Path(path_type=Path), required=True)
@click.option("--annotations", "annotations_path", type=click.Path(path_type=Path), required=True)
@click.option("--start", "start", required=True, help="start position as X,Y")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--steps", type=int, default=600, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--ignore-zones", is_flag=True, default=False,
              help="simulate a skier that does not slow down in zones")
def simulate(terrain_path, annotations_path, start, seed, steps, out_path, ignore_zones):
    """Run a descent and write interleaved trace/alert/view records."""
    grid = _load_terrain_file(terrain_path)
    store = _validated_store(grid, annotations_path)
    x, y = _parse_floats(start, 2, "--start")
    cfg = SimConfig(
        start_x=x, start_y=y, seed=seed, max_steps=steps, ignore_zones=ignore_zones
    )
    try:
        samples = run_sim(grid, store, cfg)
    except TerrainError as bad:
        _fail(f"simulation start invalid: {bad}", EXIT_INPUT)

    records = []
    track = fresh_track("sim", samples[0].pose, samples[0].speed, samples[0].t_ms)
    for sample in samples:
        records.append({"record": "trace", **sample_to_trace_dict(sample)})
        track, events = step_alerts(
            track, store, grid, sample.pose, sample.speed, sample.t_ms
        )
        for event in events:
            records.append({"record": "alert", **event.to_dict()})
        overlays = compute_overlays(store, grid, sample.pose, DEFAULT_OVERLAY_BUDGET)
        records.append({"record": "view_state", "t_ms": sample.t_ms,
                        **overlay_set_to_dict(overlays)})
    try:
        with out_path.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(canonical_json(record) + "\n")
    except OSError as bad:
        _fail(f"cannot write output: {bad}", EXIT_INPUT)
    log.info("wrote %d records to %s", len(records), out_path)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--terrain", "terrain_path", type=click.Path(path_type=Path), required=True)
@click.option("--annotations", "annotations_path", type=click.Path(path_type=Path), required=True)
@click.option("--pose", "pose_raw", required=True, help="pose as X,Y,YAW,PITCH")
@click.option("--budget", type=int, default=DEFAULT_OVERLAY_BUDGET, show_default=True)
def view(terrain_path, annotations_path, pose_raw, budget):
    """Print the overlay set a skier at the given pose would see."""
    grid = _load_terrain_file(terrain_path)
    store = _validated_store(grid, annotations_path)
    x, y, yaw, pitch = _parse_floats(pose_raw, 4, "--pose")
    try:
        eye = WorldPoint(x, y, grid.elevation_at(x, y) + EYE_HEIGHT)
        pose = Pose(eye, yaw, pitch, DEFAULT_HFOV, DEFAULT_ASPECT)
        overlays = compute_overlays(store, grid, pose, budget)
    except (OutOfBoundsError, ValueError) as bad:
        _fail(f"bad pose: {bad}", EXIT_INPUT)
    click.echo(canonical_json(overlay_set_to_dict(overlays)))
    sys.exit(EXIT_OK)


@main.command()
@click.option("--terrain", "terrain_path", type=click.Path(path_type=Path), required=True)
@click.option("--annotations", "annotations_path", type=click.Path(path_type=Path), required=True)
@click.option("--port", type=int, default=8710, show_default=True)
@click.option("--log", "log_path", type=click.Path(path_type=Path), required=True)
def serve(terrain_path, annotations_path, port, log_path):
    """Run the session server until interrupted."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(terrain_path, annotations_path, log_path)
    except OSError as bad:
        _fail(f"cannot read input: {bad}", EXIT_INPUT)
    except (TerrainError, AnnotationSchemaError, ValueError, CorruptLogError) as bad:
        _fail(f"cannot start session: {bad}", EXIT_INPUT)

    # Probe the port up front so a bind failure is a clean exit 2 instead of
    # a traceback from inside the event loop.
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind(("127.0.0.1", port))
    except OSError as bad:
        _fail(f"cannot bind port {port}: {bad}", EXIT_INPUT)
    finally:
        probe.close()

    log.info("serving on ws://127.0.0.1:%d/ws (terrain at /terrain.asc)", port)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
