"""Regenerate the bundled mountainside fixture and its golden alert log.

Run from the repository root:

    python3 scripts/make_fixtures.py

The terrain is an inclined plane dropping toward the south edge with a
north-south tent ridge west of the descent line; annotations are two hazards
(one behind the ridge), a slow-down zone across the fall line, and a safe
zone hugging the downhill edge. The golden file freezes the alert sequence of
the seed-7 descent; regenerating it is a deliberate act, not a test artifact.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from slopelink.annotation import (  # noqa: E402
    Annotation,
    AnnotationStore,
    HazardPoint,
    ZonePolygon,
    store_to_document,
)
from slopelink.terrain import TerrainGrid, dump_terrain  # noqa: E402

CREATED_AT = 1755000000000
AUTHOR = "guide-fixture"


def mountainside(x: float, y: float) -> float:
    ridge = 12.0 * max(0.0, 1.0 - abs(x - 150.0) / 30.0)
    return 0.25 * y + ridge


def rect(x0, y0, x1, y1):
    return ZonePolygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def build_annotations() -> AnnotationStore:
    store = AnnotationStore()
    common = dict(revision=1, author_id=AUTHOR, created_at=CREATED_AT)
    store.merge(Annotation(
        "hz-rocks", "hazard", HazardPoint(255.0, 180.0, 15.0), label="exposed rocks", **common
    ))
    store.merge(Annotation(
        "hz-cliff", "hazard", HazardPoint(60.0, 250.0, 10.0), label="cliff band", **common
    ))
    store.merge(Annotation(
        "zone-slow", "slow_zone", rect(210.0, 260.0, 290.0, 320.0),
        label="crusty traverse", speed_limit=8.0, **common
    ))
    store.merge(Annotation(
        "zone-safe", "safe_zone", rect(150.0, 0.0, 350.0, 60.0),
        label="regroup flat", **common
    ))
    return store


def main() -> None:
    fixtures = ROOT / "fixtures"
    fixtures.mkdir(exist_ok=True)

    grid = TerrainGrid.from_function(126, 126, 0.0, 0.0, 4.0, mountainside)
    terrain_path = fixtures / "mountainside.asc"
    terrain_path.write_text(dump_terrain(grid), encoding="utf-8")

    ann_path = fixtures / "mountainside_annotations.json"
    ann_path.write_text(
        json.dumps(store_to_document(build_annotations()), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    out_path = fixtures / "mountainside_run.jsonl"
    subprocess.run(
        [sys.executable, "-m", "slopelink.cli", "simulate",
         "--terrain", str(terrain_path), "--annotations", str(ann_path),
         "--start", "250,460", "--seed", "7", "--steps", "600",
         "--out", str(out_path)],
        check=True,
        cwd=ROOT,
    )
    alerts = [
        line for line in out_path.read_text(encoding="utf-8").splitlines()
        if json.loads(line)["record"] == "alert"
    ]
    golden_path = fixtures / "mountainside_golden.jsonl"
    golden_path.write_text("\n".join(alerts) + "\n", encoding="utf-8")
    out_path.unlink()

    print(f"terrain: {terrain_path}")
    print(f"annotations: {ann_path}")
    print(f"golden alerts ({len(alerts)}):")
    for line in alerts:
        doc = json.loads(line)
        print(f"  t={doc['t_ms']:>6} {doc['kind']}: {doc['annotation_id']} ({doc['detail']})")


if __name__ == "__main__":
    main()
