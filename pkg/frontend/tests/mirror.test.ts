// Mirror convergence: every delivery order of a scripted server message set
// must end deep-equal to the server's store.

import { describe, expect, it } from "vitest";

import { AnnotationMirror, Annotation } from "../src/store.js";
import { Envelope, MSG } from "../src/wire.js";

function serverEnvelope(type: string, payload: Record<string, unknown>, seq: number): Envelope {
  return { v: 1, type, seq, session_id: "s", sender_id: "server", t_ms: seq, payload };
}

function hazardDoc(id: string, revision: number, x: number, deleted = false) {
  return {
    id,
    kind: "hazard",
    geometry: { point: { x, y: 10, radius: 15 } },
    label: "",
    revision,
    author_id: "guide-1",
    created_at: 0,
    deleted,
  };
}

function permutations<T>(items: T[]): T[][] {
  if (items.length <= 1) return [items];
  const out: T[][] = [];
  items.forEach((item, index) => {
    const rest = [...items.slice(0, index), ...items.slice(index + 1)];
    for (const tail of permutations(rest)) out.push([item, ...tail]);
  });
  return out;
}

describe("annotation mirror", () => {
  const script: Envelope[] = [
    serverEnvelope(MSG.ANNOTATION_UPSERT, { annotation: hazardDoc("a", 1, 100) }, 1),
    serverEnvelope(MSG.ANNOTATION_UPSERT, { annotation: hazardDoc("a", 2, 120) }, 2),
    serverEnvelope(MSG.ANNOTATION_UPSERT, { annotation: hazardDoc("b", 1, 50) }, 3),
    serverEnvelope(MSG.ANNOTATION_DELETE, { annotation: hazardDoc("b", 2, 50, true) }, 4),
  ];

  // Independent expectation: LWW max per id, computed directly.
  function expected(): Map<string, Annotation> {
    const byId = new Map<string, Annotation>();
    for (const env of script) {
      const doc = env.payload.annotation as ReturnType<typeof hazardDoc>;
      const current = byId.get(doc.id);
      if (
        current === undefined ||
        doc.revision > current.revision ||
        (doc.revision === current.revision && doc.author_id > current.author_id)
      ) {
        byId.set(doc.id, doc as unknown as Annotation);
      }
    }
    return byId;
  }

  it("converges for all 24 delivery orders of the 4-message script", () => {
    const want = expected();
    const orders = permutations(script);
    expect(orders.length).toBe(24);
    for (const order of orders) {
      const mirror = new AnnotationMirror();
      for (const env of order) mirror.applyEnvelope(env);
      expect(mirror.entries.size).toBe(want.size);
      for (const [id, annotation] of want) {
        expect(mirror.get(id)).toEqual(annotation);
      }
      expect(mirror.live().map((a) => a.id)).toEqual(["a"]);
      expect(mirror.get("a")!.revision).toBe(2);
      expect(mirror.get("b")!.deleted).toBe(true);
    }
  });

  it("applies snapshots as merges so overlap with deltas is harmless", () => {
    const mirror = new AnnotationMirror();
    mirror.applyEnvelope(script[1]); // delta rev 2 arrives first
    const snapshot = serverEnvelope(
      MSG.SNAPSHOT,
      { annotations: [hazardDoc("a", 1, 100)], terrain_ref: "h" },
      9,
    );
    mirror.applyEnvelope(snapshot); // stale snapshot must not roll back
    expect(mirror.get("a")!.revision).toBe(2);
  });

  it("redelivered broadcasts are idempotent", () => {
    const mirror = new AnnotationMirror();
    for (const env of script) mirror.applyEnvelope(env);
    const before = [...mirror.entries.entries()];
    for (const env of script) mirror.applyEnvelope(env);
    expect([...mirror.entries.entries()]).toEqual(before);
  });
});
