// Annotation sketching: taps on the map accumulate into a pending shape that
// is validated locally (same rules as the server) and only sent on an
// explicit confirm with enough vertices.

import { XY, polygonArea, polygonIsSimple } from "./geometry.js";
import { AnnotationMirror, Annotation, AnnotationKind } from "./store.js";
import { TerrainField, containsXY } from "./terrain.js";

export interface AuthoringParams {
  label: string;
  speedLimit?: number;
  radius?: number;
}

export const DEFAULT_HAZARD_RADIUS = 15;

export class DrawState {
  tool: AnnotationKind | null = null;
  vertices: XY[] = [];

  begin(tool: AnnotationKind): void {
    this.tool = tool;
    this.vertices = [];
  }

  addTap(x: number, y: number): void {
    if (this.tool === null) return;
    if (this.tool === "hazard") {
      this.vertices = [[x, y]]; // a hazard is a single (re-)placeable tap
    } else {
      this.vertices.push([x, y]);
    }
  }

  undo(): void {
    this.vertices.pop();
  }

  cancel(): void {
    this.tool = null;
    this.vertices = [];
  }

  canConfirm(): boolean {
    if (this.tool === null) return false;
    return this.tool === "hazard" ? this.vertices.length === 1 : this.vertices.length >= 3;
  }

  /** Local violations, mirroring the server's validator codes. */
  validate(terrain: TerrainField, params: AuthoringParams): string[] {
    const out: string[] = [];
    if (this.tool === null) return ["NoTool"];
    if (this.tool === "hazard") {
      if (this.vertices.length !== 1) return ["NeedsOneTap"];
      const [x, y] = this.vertices[0];
      if (!containsXY(terrain, x, y)) out.push("OutOfTerrainBounds");
      if (params.radius !== undefined && !(params.radius > 0)) out.push("NonPositiveRadius");
      return out;
    }
    if (this.vertices.length < 3) return ["TooFewVertices"];
    if (!polygonIsSimple(this.vertices)) out.push("SelfIntersecting");
    if (polygonArea(this.vertices) === 0) out.push("DegenerateArea");
    for (const [x, y] of this.vertices) {
      if (!containsXY(terrain, x, y)) {
        out.push("OutOfTerrainBounds");
        break;
      }
    }
    if (this.tool === "slow_zone") {
      if (params.speedLimit === undefined) out.push("SpeedLimitMissing");
      else if (!(params.speedLimit > 0)) out.push("SpeedLimitNotPositive");
    }
    return out;
  }

  /**
   * Build the annotation to send; throws if the sketch does not validate.
   * Revision = local max for the id + 1 (fresh ids start at 1).
   */
  confirm(
    terrain: TerrainField,
    mirror: AnnotationMirror,
    authorId: string,
    params: AuthoringParams,
    nowMs: number,
    id?: string,
  ): Annotation {
    if (!this.canConfirm()) throw new Error("sketch incomplete");
    const violations = this.validate(terrain, params);
    if (violations.length > 0) throw new Error(violations.join(", "));
    const tool = this.tool as AnnotationKind;
    const annId = id ?? `${tool}-${nowMs.toString(36)}-${Math.floor(Math.random() * 1e6).toString(36)}`;
    const annotation: Annotation = {
      id: annId,
      kind: tool,
      geometry:
        tool === "hazard"
          ? {
              point: {
                x: this.vertices[0][0],
                y: this.vertices[0][1],
                radius: params.radius ?? DEFAULT_HAZARD_RADIUS,
              },
            }
          : { polygon: this.vertices.map(([x, y]) => [x, y] as [number, number]) },
      label: params.label,
      revision: mirror.maxRevision(annId) + 1,
      author_id: authorId,
      created_at: nowMs,
      deleted: false,
    };
    if (tool === "slow_zone") annotation.speed_limit = params.speedLimit;
    this.cancel();
    return annotation;
  }
}

/** Tombstone for an existing annotation with a bumped revision. */
export function buildTombstone(
  mirror: AnnotationMirror,
  id: string,
  authorId: string,
  nowMs: number,
): Annotation {
  const current = mirror.get(id);
  if (current === undefined) throw new Error(`unknown annotation ${id}`);
  return {
    ...current,
    revision: mirror.maxRevision(id) + 1,
    author_id: authorId,
    created_at: nowMs,
    deleted: true,
  };
}
