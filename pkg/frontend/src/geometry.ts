// 2D polygon predicates for local sketch validation. Same rules the server
// enforces, so a rejected sketch never leaves the device.

export type XY = [number, number];

function orient(ax: number, ay: number, bx: number, by: number, cx: number, cy: number): number {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

function onSegment(px: number, py: number, ax: number, ay: number, bx: number, by: number): boolean {
  if (orient(ax, ay, bx, by, px, py) !== 0) return false;
  return (
    Math.min(ax, bx) <= px && px <= Math.max(ax, bx) &&
    Math.min(ay, by) <= py && py <= Math.max(ay, by)
  );
}

/** Even-odd containment; boundary points count as inside. */
export function pointInPolygon(px: number, py: number, vertices: XY[]): boolean {
  const n = vertices.length;
  for (let k = 0; k < n; k++) {
    const [ax, ay] = vertices[k];
    const [bx, by] = vertices[(k + 1) % n];
    if (onSegment(px, py, ax, ay, bx, by)) return true;
  }
  let inside = false;
  for (let k = 0; k < n; k++) {
    const [ax, ay] = vertices[k];
    const [bx, by] = vertices[(k + 1) % n];
    if (ay <= py !== by <= py) {
      const xCross = ax + ((py - ay) * (bx - ax)) / (by - ay);
      if (px < xCross) inside = !inside;
    }
  }
  return inside;
}

function segmentsIntersect(a1: XY, a2: XY, b1: XY, b2: XY): boolean {
  const d1 = orient(b1[0], b1[1], b2[0], b2[1], a1[0], a1[1]);
  const d2 = orient(b1[0], b1[1], b2[0], b2[1], a2[0], a2[1]);
  const d3 = orient(a1[0], a1[1], a2[0], a2[1], b1[0], b1[1]);
  const d4 = orient(a1[0], a1[1], a2[0], a2[1], b2[0], b2[1]);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 === 0 && onSegment(a1[0], a1[1], b1[0], b1[1], b2[0], b2[1])) return true;
  if (d2 === 0 && onSegment(a2[0], a2[1], b1[0], b1[1], b2[0], b2[1])) return true;
  if (d3 === 0 && onSegment(b1[0], b1[1], a1[0], a1[1], a2[0], a2[1])) return true;
  if (d4 === 0 && onSegment(b2[0], b2[1], a1[0], a1[1], a2[0], a2[1])) return true;
  return false;
}

function foldsBack(shared: XY, prev: XY, next: XY): boolean {
  // Collinear neighbors that double back over the shared vertex.
  return (
    orient(prev[0], prev[1], shared[0], shared[1], next[0], next[1]) === 0 &&
    (prev[0] - shared[0]) * (next[0] - shared[0]) +
      (prev[1] - shared[1]) * (next[1] - shared[1]) > 0
  );
}

/** No self-intersections; adjacent edges may only meet at the shared vertex. */
export function polygonIsSimple(vertices: XY[]): boolean {
  const n = vertices.length;
  if (n < 3) return false;
  for (let i = 0; i < n; i++) {
    const a1 = vertices[i];
    const a2 = vertices[(i + 1) % n];
    if (a1[0] === a2[0] && a1[1] === a2[1]) return false;
    for (let j = i + 1; j < n; j++) {
      const b1 = vertices[j];
      const b2 = vertices[(j + 1) % n];
      if (j === (i + 1) % n) {
        if (foldsBack(a2, a1, b2)) return false;
        continue;
      }
      if (i === 0 && j === n - 1) {
        if (foldsBack(b2, b1, a2)) return false;
        continue;
      }
      if (segmentsIntersect(a1, a2, b1, b2)) return false;
    }
  }
  return true;
}

export function polygonArea(vertices: XY[]): number {
  let total = 0;
  const n = vertices.length;
  for (let k = 0; k < n; k++) {
    const [ax, ay] = vertices[k];
    const [bx, by] = vertices[(k + 1) % n];
    total += ax * by - bx * ay;
  }
  return Math.abs(total) / 2;
}
