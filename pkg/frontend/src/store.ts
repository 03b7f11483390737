// Local mirror of the server's annotation set. The UI holds no authoritative
// state: every mutation round-trips through the server and lands here via
// SNAPSHOT or rebroadcast deltas, merged last-writer-wins so any delivery
// order converges.

import { Envelope, MSG } from "./wire.js";

export type AnnotationKind = "hazard" | "slow_zone" | "safe_zone";

export interface PointGeometry {
  point: { x: number; y: number; radius: number };
}

export interface PolygonGeometry {
  polygon: [number, number][];
}

export type Geometry = PointGeometry | PolygonGeometry;

export interface Annotation {
  id: string;
  kind: AnnotationKind;
  geometry: Geometry;
  label: string;
  speed_limit?: number;
  revision: number;
  author_id: string;
  created_at: number;
  deleted: boolean;
}

export function isPoint(g: Geometry): g is PointGeometry {
  return "point" in g;
}

export function annotationFromDoc(doc: Record<string, unknown>): Annotation | null {
  const { id, kind, geometry, revision, author_id } = doc as {
    id?: unknown; kind?: unknown; geometry?: unknown; revision?: unknown; author_id?: unknown;
  };
  if (typeof id !== "string" || typeof revision !== "number") return null;
  if (kind !== "hazard" && kind !== "slow_zone" && kind !== "safe_zone") return null;
  if (typeof geometry !== "object" || geometry === null) return null;
  const ann: Annotation = {
    id,
    kind,
    geometry: geometry as Geometry,
    label: typeof doc.label === "string" ? doc.label : "",
    revision,
    author_id: typeof author_id === "string" ? author_id : "",
    created_at: typeof doc.created_at === "number" ? doc.created_at : 0,
    deleted: doc.deleted === true,
  };
  if (typeof doc.speed_limit === "number") ann.speed_limit = doc.speed_limit;
  return ann;
}

function lwwLess(a: Annotation, b: Annotation): boolean {
  // (revision, author_id) lexicographic: does a lose to b?
  return a.revision < b.revision || (a.revision === b.revision && a.author_id < b.author_id);
}

export class AnnotationMirror {
  readonly entries = new Map<string, Annotation>();

  merge(incoming: Annotation): boolean {
    const current = this.entries.get(incoming.id);
    if (current !== undefined && !lwwLess(current, incoming)) return false;
    this.entries.set(incoming.id, incoming);
    return true;
  }

  live(): Annotation[] {
    return [...this.entries.values()]
      .filter((a) => !a.deleted)
      .sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  }

  get(id: string): Annotation | undefined {
    return this.entries.get(id);
  }

  maxRevision(id: string): number {
    return this.entries.get(id)?.revision ?? 0;
  }

  clear(): void {
    this.entries.clear();
  }

  /** Apply a server envelope; returns true if the live set may have changed. */
  applyEnvelope(env: Envelope): boolean {
    if (env.type === MSG.SNAPSHOT) {
      const docs = env.payload.annotations;
      if (Array.isArray(docs)) {
        let changed = false;
        for (const doc of docs) {
          const ann = annotationFromDoc(doc as Record<string, unknown>);
          if (ann !== null && this.merge(ann)) changed = true;
        }
        return changed;
      }
      return false;
    }
    if (env.type === MSG.ANNOTATION_UPSERT || env.type === MSG.ANNOTATION_DELETE) {
      const ann = annotationFromDoc(
        (env.payload.annotation ?? {}) as Record<string, unknown>,
      );
      return ann !== null && this.merge(ann);
    }
    return false;
  }
}
