"""Acceptance suite: one test per shipping criterion, tolerances pinned.

Each test prints a single ``[acceptance] <name>: PASS/FAIL`` line (visible
with ``pytest -s tests/test_acceptance.py``) on top of the usual pytest
verdict.
"""

import hashlib
import itertools
import json
import math
import random
import time
from contextlib import contextmanager

import pytest
from click.testing import CliRunner

from slopelink.alerts import fresh_track, step_alerts
from slopelink.annotation import (
    Annotation,
    AnnotationStore,
    HazardPoint,
    ZonePolygon,
    annotation_from_dict,
    point_in_polygon,
    store_to_document,
    validate_annotation,
)
from slopelink.cli import main as cli_main
from slopelink.protocol import (
    ClientMirror,
    ClientOutbox,
    Session,
    canonical_json,
    envelope_to_dict,
    parse_log_lines,
    replay_log,
)
from slopelink.sim import SimConfig, run_sim
from slopelink.terrain import TerrainGrid, WorldPoint, load_terrain
from slopelink.viewmodel import Pose, anchor_point, compute_overlays, pose_to_dict
from slopelink.alerts import track_to_dict
from conftest import FIXTURES
from oracles import (
    dense_los,
    plane,
    plane_grid,
    polygon_self_intersects,
    random_polygon,
    random_simple_polygon,
    select_overlays_bruteforce,
    winding_inside,
)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


def bumpy_grid(seed, ncols=21, nrows=21, cellsize=5.0):
    rng = random.Random(seed)
    a, b = rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)
    bumps = [
        (rng.uniform(0, (ncols - 1) * cellsize), rng.uniform(0, (nrows - 1) * cellsize),
         rng.uniform(5, 25), rng.uniform(3, 15))
        for _ in range(3)
    ]

    def fn(x, y):
        z = a * x + b * y
        for cx, cy, r, h in bumps:
            z += h * math.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * (r / 2.5) ** 2))
        return z

    return TerrainGrid.from_function(ncols, nrows, 0.0, 0.0, cellsize, fn)


def test_geometry_oracle_suite():
    with criterion("geometry-oracle-suite"):
        started = time.monotonic()
        rng = random.Random(1001)

        # Containment: 10,000 random point/polygon cases, zero disagreements.
        disagreements = 0
        cases = 0
        for _ in range(100):
            poly = random_simple_polygon(rng)
            for _ in range(100):
                px, py = rng.uniform(-25, 25), rng.uniform(-25, 25)
                cases += 1
                if point_in_polygon(px, py, poly) != winding_inside(px, py, poly):
                    disagreements += 1
        assert cases >= 10_000
        assert disagreements == 0

        # Simplicity: 1,000 random polygons against the all-pairs oracle.
        grid = TerrainGrid.from_function(2, 2, -100.0, -100.0, 200.0, lambda x, y: 0.0)
        checked = 0
        for _ in range(1000):
            poly = random_simple_polygon(rng) if rng.random() < 0.5 else random_polygon(rng)
            a = Annotation("z", "safe_zone", ZonePolygon(poly))
            flagged = any(v.code == "SelfIntersecting" for v in validate_annotation(a, grid))
            assert flagged == polygon_self_intersects(poly)
            checked += 1
        assert checked >= 1000
        assert time.monotonic() - started < 30.0


def test_terrain_plane_exactness():
    with criterion("terrain-plane-exactness"):
        rng = random.Random(1002)
        for _ in range(100):
            a, b, c = rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-100, 100)
            ncols, nrows = rng.randint(3, 20), rng.randint(3, 20)
            ox, oy = rng.uniform(-500, 500), rng.uniform(-500, 500)
            cs = rng.uniform(0.5, 30.0)
            grid = plane_grid(a, b, c, ncols=ncols, nrows=nrows, origin_x=ox, origin_y=oy,
                              cellsize=cs)
            fn = plane(a, b, c)
            for _ in range(25):
                x = rng.uniform(ox, ox + (ncols - 1) * cs)
                y = rng.uniform(oy, oy + (nrows - 1) * cs)
                assert abs(grid.elevation_at(x, y) - fn(x, y)) <= 1e-9 * max(
                    1.0, abs(fn(x, y))
                )
            for _ in range(10):
                x = rng.uniform(ox + cs, ox + (ncols - 2) * cs)
                y = rng.uniform(oy + cs, oy + (nrows - 2) * cs)
                dzdx, dzdy = grid.gradient_at(x, y)
                assert abs(dzdx - a) <= 1e-9
                assert abs(dzdy - b) <= 1e-9


def test_occlusion_soundness():
    with criterion("occlusion-soundness"):
        # Ridge fixture: an anchor behind a tall tent ridge must not appear.
        def tent(x, y):
            return 12.0 * max(0.0, 1.0 - abs(x - 50.0) / 20.0)

        grid = TerrainGrid.from_function(21, 21, 0.0, -50.0, 5.0, tent)
        store = AnnotationStore()
        store.merge(Annotation("behind", "hazard", HazardPoint(90.0, 0.0, 10.0)))
        pose = Pose(WorldPoint(5.0, 0.0, tent(5, 0) + 1.7), 0.0, 0.0, math.pi / 2, 1.0)
        assert compute_overlays(store, grid, pose, 5).overlays == ()

        # 100 random terrains: nothing the dense oracle calls occluded survives.
        rng = random.Random(1003)
        included = 0
        for seed in range(100):
            grid = bumpy_grid(seed)
            store = AnnotationStore()
            for i in range(3):
                store.merge(Annotation(
                    f"h{i}", "hazard",
                    HazardPoint(rng.uniform(2, 98), rng.uniform(2, 98), 10.0),
                ))
            x0, y0 = rng.uniform(10, 70), rng.uniform(10, 70)
            store.merge(Annotation(
                "z", "safe_zone",
                ZonePolygon(((x0, y0), (x0 + 15, y0), (x0 + 15, y0 + 15), (x0, y0 + 15))),
            ))
            px, py = rng.uniform(2, 98), rng.uniform(2, 98)
            pose = Pose(
                WorldPoint(px, py, grid.elevation_at(px, py) + 1.7),
                rng.uniform(-math.pi, math.pi), rng.uniform(-0.5, 0.2), 1.9, 1.5,
            )
            out = compute_overlays(store, grid, pose, 10)
            for overlay in out.overlays:
                included += 1
                assert dense_los(grid, pose.position, overlay.anchor_world)
        assert included > 50  # the scenes actually exercised visibility


def test_overlay_budget_and_ordering():
    with criterion("overlay-budget-and-ordering"):
        pri = {"hazard": 3, "slow_zone": 2, "safe_zone": 1}
        grid = TerrainGrid.from_function(21, 21, -100.0, -100.0, 10.0, lambda x, y: 0.0)

        # The 7-annotation example: 3 hazards then 2 slow zones, safes dropped.
        store = AnnotationStore()
        store.merge(Annotation("hz-far", "hazard", HazardPoint(60.0, 5.0, 10.0)))
        store.merge(Annotation("hz-near", "hazard", HazardPoint(20.0, -3.0, 10.0)))
        store.merge(Annotation("hz-mid", "hazard", HazardPoint(40.0, 0.0, 10.0)))

        def zone(ann_id, kind, x0, y0, x1, y1, limit=None):
            return Annotation(
                ann_id, kind, ZonePolygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1))),
                speed_limit=limit,
            )

        store.merge(zone("slow-far", "slow_zone", 70, -5, 80, 5, 5.0))
        store.merge(zone("slow-near", "slow_zone", 30, -5, 38, 5, 5.0))
        store.merge(zone("safe-a", "safe_zone", 50, -8, 58, -2))
        store.merge(zone("safe-b", "safe_zone", 85, -5, 95, 5))
        pose = Pose(WorldPoint(0.0, 0.0, 1.7), 0.0, 0.0, math.pi / 2, 1.0)
        got = [o.annotation_id for o in compute_overlays(store, grid, pose, 5).overlays]
        assert got == ["hz-near", "hz-mid", "hz-far", "slow-near", "slow-far"]

        # 1,000 random annotation sets against the brute-force oracle.
        rng = random.Random(1004)
        for _ in range(1000):
            store = AnnotationStore()
            n = rng.randint(1, 8)
            for i in range(n):
                kind = rng.choice(list(pri))
                if kind == "hazard":
                    store.merge(Annotation(
                        f"a{i}", kind,
                        HazardPoint(rng.uniform(-80, 80), rng.uniform(-80, 80), 10.0),
                    ))
                else:
                    x0, y0 = rng.uniform(-80, 60), rng.uniform(-80, 60)
                    store.merge(zone(
                        f"a{i}", kind, x0, y0, x0 + rng.uniform(4, 15),
                        y0 + rng.uniform(4, 15),
                        5.0 if kind == "slow_zone" else None,
                    ))
            pose = Pose(
                WorldPoint(rng.uniform(-50, 50), rng.uniform(-50, 50), 1.7),
                rng.uniform(-math.pi, math.pi), rng.uniform(-0.4, 0.2), 1.8, 1.6,
            )
            budget = rng.randint(1, 6)
            out = compute_overlays(store, grid, pose, budget)
            assert len(out.overlays) <= budget
            got = [o.annotation_id for o in out.overlays]
            want = select_overlays_bruteforce(
                pose, grid,
                [(a.id, pri[a.kind], anchor_point(a, grid, pose)) for a in store.live()],
                budget,
            )
            assert got == want


TERRAIN_REF = "acceptance-terrain-ref"


def protocol_grid():
    return TerrainGrid.from_function(21, 21, 0.0, 0.0, 10.0, lambda x, y: 0.2 * (200.0 - x))


def test_sync_convergence_exhaustive():
    with criterion("sync-convergence"):
        grid = protocol_grid()

        def hz(ann_id, rev, x=100.0):
            return Annotation(ann_id, "hazard", HazardPoint(x, 100.0, 15.0),
                              revision=rev, author_id="guide-1")

        def pose_doc(x, y):
            return {"x": x, "y": y, "z": grid.elevation_at(x, y) + 1.7, "yaw": 0.0,
                    "pitch": 0.0, "hfov": math.pi / 2, "aspect": 1.0}

        # Guide stream: join + 4 mutating messages (incl. a revision bump and
        # a tombstone); skier stream: join + 2 poses. Every interleaving
        # preserving per-sender order must leave both mirrors equal to the
        # server's live store.
        def guide_stream(outbox):
            return [
                outbox.hello("guide", TERRAIN_REF, t_ms=1),
                outbox.upsert(hz("a", 1), t_ms=2),
                outbox.upsert(hz("a", 2, x=110.0), t_ms=3),
                outbox.upsert(hz("b", 1), t_ms=4),
                outbox.delete(hz("a", 3).tombstone(3, "guide-1"), t_ms=5),
            ]

        def skier_stream(outbox):
            return [
                outbox.hello("skier", TERRAIN_REF, t_ms=1),
                outbox.pose(pose_doc(60.0, 100.0), 3.0, t_ms=100),
                outbox.pose(pose_doc(70.0, 100.0), 3.0, t_ms=200),
            ]

        lengths = (5, 3)
        positions = itertools.combinations(range(sum(lengths)), lengths[1])
        reference = None
        orders = 0
        for skier_slots in positions:
            guide = ClientOutbox("guide-1")
            skier = ClientOutbox("skier-1")
            gmsgs = guide_stream(guide)
            smsgs = skier_stream(skier)
            merged = []
            gi = si = 0
            for slot in range(sum(lengths)):
                if slot in skier_slots:
                    merged.append(smsgs[si]); si += 1
                else:
                    merged.append(gmsgs[gi]); gi += 1

            session = Session(grid, TERRAIN_REF)
            mirrors = {"guide-1": ClientMirror(), "skier-1": ClientMirror()}
            for msg in merged:
                for recipient, env in session.handle_message(msg):
                    assert env.type != "ERROR"
                    mirrors[recipient].apply(env)

            live = {a.id: a for a in session.store.live()}
            for mirror in mirrors.values():
                assert mirror.live_view() == live
            if reference is None:
                reference = live
            assert live == reference
            orders += 1
        assert orders == math.comb(8, 3)


def test_replay_determinism():
    with criterion("replay-determinism"):
        text = (FIXTURES / "mountainside.asc").read_text(encoding="utf-8")
        grid = load_terrain(text)
        terrain_ref = hashlib.sha256(text.encode("utf-8")).hexdigest()
        fixture_store = AnnotationStore()
        doc = json.loads((FIXTURES / "mountainside_annotations.json").read_text())
        for raw in doc["annotations"]:
            fixture_store.merge(annotation_from_dict(raw))

        session = Session(grid, terrain_ref)
        guide = ClientOutbox("guide-1")
        skier = ClientOutbox("skier-1")
        live_out = []

        def feed(msg):
            out = session.handle_message(msg)
            assert all(env.type != "ERROR" for _, env in out)
            live_out.extend(out)

        feed(guide.hello("guide", terrain_ref, t_ms=10))
        # Five upserts (the four fixture annotations plus a scratch hazard)
        # and one delete of the scratch hazard.
        t = 20
        for a in fixture_store.live():
            feed(guide.upsert(a, t_ms=t))
            t += 10
        scratch = Annotation("hz-temp", "hazard", HazardPoint(100.0, 400.0, 10.0),
                             revision=1, author_id="guide-1")
        feed(guide.upsert(scratch, t_ms=t))
        feed(guide.delete(scratch.tombstone(2, "guide-1"), t_ms=t + 10))
        feed(skier.hello("skier", terrain_ref, t_ms=t + 20))

        samples = run_sim(grid, fixture_store, SimConfig(
            start_x=250.0, start_y=460.0, seed=7, max_steps=600,
        ))
        base_t = 1000
        for s in samples:
            feed(skier.pose(pose_to_dict(s.pose), s.speed, t_ms=base_t + s.t_ms))

        live_alerts = [env.payload for _, env in live_out if env.type == "ALERT"]
        assert len(live_alerts) >= 3

        lines = [canonical_json(envelope_to_dict(e)) for e in session.log]
        parsed = parse_log_lines(lines)
        replay_out = []
        replayed = replay_log(parsed, grid, terrain_ref, on_emit=replay_out.append)
        replay_alerts = [env.payload for _, env in replay_out if env.type == "ALERT"]

        def fingerprint(sess, alerts):
            return canonical_json({
                "store": store_to_document(sess.store),
                "tracks": {k: track_to_dict(v) for k, v in sorted(sess.tracks.items())},
                "alerts": alerts,
            })

        assert fingerprint(replayed, replay_alerts) == fingerprint(session, live_alerts)


def test_simulator_physics():
    with criterion("simulator-physics"):
        slope = 0.3
        grid = TerrainGrid.from_function(301, 21, 0.0, 0.0, 5.0,
                                         lambda x, y: 500.0 - slope * x)
        cfg = SimConfig(start_x=20.0, start_y=50.0, seed=7, max_steps=600)
        samples = run_sim(grid, AnnotationStore(), cfg)
        v_closed = math.sqrt(9.81 * math.sin(math.atan(slope)) / cfg.drag)
        assert abs(samples[-1].speed - v_closed) <= 0.01 * v_closed

        # Fixed seed means byte-identical traces.
        again = run_sim(grid, AnnotationStore(), cfg)
        serialize = lambda ss: "\n".join(
            canonical_json({"t": s.t_ms, "p": pose_to_dict(s.pose), "v": s.speed}) for s in ss
        )
        assert serialize(samples).encode() == serialize(again).encode()

        # Drag-free energy bound on rolling terrain, several seeds.
        def rolling(x, y):
            return 400.0 - 0.25 * x + 6.0 * math.sin(x / 40.0) + 3.0 * math.cos(y / 30.0)

        hilly = TerrainGrid.from_function(241, 41, 0.0, 0.0, 5.0, rolling)
        for seed in range(5):
            cfg = SimConfig(start_x=30.0, start_y=100.0, seed=seed, drag=1e-12, max_steps=800)
            run = run_sim(hilly, AnnotationStore(), cfg)
            z0 = run[0].pose.position.z
            for s in run:
                drop = max(z0 - s.pose.position.z, 0.0)
                assert s.speed**2 <= 2.0 * 9.81 * drop * 1.01 + 1e-9


def test_alert_discipline():
    with criterion("alert-discipline"):
        grid = TerrainGrid.from_function(21, 21, -100.0, -100.0, 10.0, lambda x, y: 0.0)

        def pose_xy(x, y):
            return Pose(WorldPoint(x, y, 1.7), 0.0, 0.0, math.pi / 2, 1.0)

        def run_stream(store, samples):
            track = fresh_track("s1", pose_xy(*samples[0][:2]), samples[0][2], samples[0][3])
            events = []
            for x, y, v, t in samples:
                track, fired = step_alerts(track, store, grid, pose_xy(x, y), v, t)
                events.extend(fired)
            return events

        zone = Annotation(
            "slow", "slow_zone",
            ZonePolygon(((0.0, -10.0), (20.0, -10.0), (20.0, 10.0), (0.0, 10.0))),
            speed_limit=5.0,
        )
        store = AnnotationStore()
        store.merge(zone)

        # 20-step boundary jitter: one entry, no exits.
        jitter = [((1.0 if k % 2 == 0 else -1.0), 0.0, 2.0, 100 * k) for k in range(20)]
        events = run_stream(store, jitter)
        assert [e.kind for e in events].count("SlowZoneEntered") == 1
        assert [e.kind for e in events].count("SlowZoneExited") == 0

        # 30 s parked 5 m from a 15 m hazard at 0.1 s steps: exactly 3 alerts.
        hazard_store = AnnotationStore()
        hazard_store.merge(Annotation("hz", "hazard", HazardPoint(0.0, 5.0, 15.0)))
        park = [(0.0, 0.0, 0.1, k * 100) for k in range(300)]
        events = run_stream(hazard_store, park)
        assert [e.t_ms for e in events if e.kind == "HazardProximity"] == [0, 10000, 20000]

        # Enter/exit strictly alternate over 1,000 random walks.
        rng = random.Random(1006)
        for _ in range(1000):
            x, y = rng.uniform(-10, 30), rng.uniform(-15, 15)
            samples = []
            for k in range(40):
                x = min(max(x + rng.uniform(-3, 3), -90), 90)
                y = min(max(y + rng.uniform(-3, 3), -90), 90)
                samples.append((x, y, 2.0, k * 100))
            kinds = [e.kind for e in run_stream(store, samples)
                     if e.kind in ("SlowZoneEntered", "SlowZoneExited")]
            assert all(a != b for a, b in zip(kinds, kinds[1:]))
            if kinds:
                assert kinds[0] == "SlowZoneEntered"


def test_end_to_end_fixture(tmp_path):
    with criterion("end-to-end-fixture"):
        started = time.monotonic()
        out = tmp_path / "run.jsonl"
        result = CliRunner().invoke(cli_main, [
            "simulate",
            "--terrain", str(FIXTURES / "mountainside.asc"),
            "--annotations", str(FIXTURES / "mountainside_annotations.json"),
            "--start", "250,460", "--seed", "7", "--steps", "600",
            "--out", str(out),
        ])
        assert result.exit_code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        alerts = [l for l in lines if json.loads(l)["record"] == "alert"]
        golden = (FIXTURES / "mountainside_golden.jsonl").read_text(
            encoding="utf-8"
        ).splitlines()
        assert alerts == golden

        doc = json.loads((FIXTURES / "mountainside_annotations.json").read_text())
        safe = next(a for a in doc["annotations"] if a["kind"] == "safe_zone")
        verts = [tuple(v) for v in safe["geometry"]["polygon"]]
        last = [json.loads(l) for l in lines if json.loads(l)["record"] == "trace"][-1]
        assert point_in_polygon(last["x"], last["y"], verts)
        assert time.monotonic() - started < 5.0
