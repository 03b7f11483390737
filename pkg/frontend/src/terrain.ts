// ESRI ASCII grid parsing and queries, mirroring the server's conventions:
// node (j, i) sits at (originX + j*cellsize, originY + i*cellsize) with i
// counted from the south; the file stores rows north to south.

export interface TerrainField {
  ncols: number;
  nrows: number;
  originX: number;
  originY: number;
  cellsize: number;
  /** south row first, row-major */
  values: Float64Array;
}

export function parseAsciiGrid(text: string): TerrainField {
  const tokens = text.split(/\s+/).filter((t) => t.length > 0);
  let pos = 0;
  const take = (): string => {
    if (pos >= tokens.length) throw new Error("unexpected end of terrain file");
    return tokens[pos++];
  };
  const header: Record<string, number> = {};
  for (const name of ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize"]) {
    const key = take().toLowerCase();
    if (key !== name) throw new Error(`expected header ${name}, found ${key}`);
    const value = Number(take());
    if (!Number.isFinite(value)) throw new Error(`header ${name} is not numeric`);
    header[name] = value;
  }
  let nodata: number | null = null;
  if (pos < tokens.length && tokens[pos].toLowerCase() === "nodata_value") {
    pos += 1;
    nodata = Number(take());
  }
  const ncols = header.ncols;
  const nrows = header.nrows;
  if (!Number.isInteger(ncols) || !Number.isInteger(nrows) || ncols < 2 || nrows < 2) {
    throw new Error("grid needs integer ncols >= 2 and nrows >= 2");
  }
  if (!(header.cellsize > 0)) throw new Error("cellsize must be positive");
  const data = tokens.slice(pos);
  if (data.length !== ncols * nrows) {
    throw new Error(`expected ${ncols * nrows} values, found ${data.length}`);
  }
  const values = new Float64Array(ncols * nrows);
  for (let r = 0; r < nrows; r++) {
    for (let c = 0; c < ncols; c++) {
      const v = Number(data[r * ncols + c]);
      if (!Number.isFinite(v)) throw new Error("non-finite elevation");
      if (nodata !== null && v === nodata) throw new Error("grid contains NODATA cells");
      values[(nrows - 1 - r) * ncols + c] = v; // flip to south-first
    }
  }
  return {
    ncols,
    nrows,
    originX: header.xllcorner,
    originY: header.yllcorner,
    cellsize: header.cellsize,
    values,
  };
}

export function maxX(t: TerrainField): number {
  return t.originX + (t.ncols - 1) * t.cellsize;
}

export function maxY(t: TerrainField): number {
  return t.originY + (t.nrows - 1) * t.cellsize;
}

export function containsXY(t: TerrainField, x: number, y: number): boolean {
  return x >= t.originX && x <= maxX(t) && y >= t.originY && y <= maxY(t);
}

export function elevationAt(t: TerrainField, x: number, y: number): number {
  const fx = (x - t.originX) / t.cellsize;
  const fy = (y - t.originY) / t.cellsize;
  if (fx < 0 || fx > t.ncols - 1 || fy < 0 || fy > t.nrows - 1) {
    throw new RangeError(`(${x}, ${y}) outside terrain`);
  }
  const j = Math.min(Math.floor(fx), t.ncols - 2);
  const i = Math.min(Math.floor(fy), t.nrows - 2);
  const u = fx - j;
  const v = fy - i;
  const z = t.values;
  return (
    z[i * t.ncols + j] * (1 - u) * (1 - v) +
    z[i * t.ncols + j + 1] * u * (1 - v) +
    z[(i + 1) * t.ncols + j] * (1 - u) * v +
    z[(i + 1) * t.ncols + j + 1] * u * v
  );
}

/** One vertex per grid node plus two triangles per cell, for the 3D views. */
export function buildMeshArrays(t: TerrainField): {
  positions: Float32Array;
  indices: Uint32Array;
} {
  const positions = new Float32Array(t.ncols * t.nrows * 3);
  for (let i = 0; i < t.nrows; i++) {
    for (let j = 0; j < t.ncols; j++) {
      const k = (i * t.ncols + j) * 3;
      positions[k] = t.originX + j * t.cellsize;
      positions[k + 1] = t.originY + i * t.cellsize;
      positions[k + 2] = t.values[i * t.ncols + j];
    }
  }
  const indices = new Uint32Array((t.ncols - 1) * (t.nrows - 1) * 6);
  let w = 0;
  for (let i = 0; i < t.nrows - 1; i++) {
    for (let j = 0; j < t.ncols - 1; j++) {
      const a = i * t.ncols + j;
      const b = a + 1;
      const c = a + t.ncols;
      const d = c + 1;
      indices[w++] = a; indices[w++] = b; indices[w++] = d;
      indices[w++] = a; indices[w++] = d; indices[w++] = c;
    }
  }
  return { positions, indices };
}
