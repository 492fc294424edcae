/**
 * ASCII-grid raster I/O: the cross-component interchange format.
 *
 * Header lines (ncols, nrows, xllcorner, yllcorner, cellsize) followed by
 * whitespace-separated 0/1 cell values, row-major, first row on top.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export interface BinaryGrid {
  width: number;
  height: number;
  cellSize: number;
  /** Row-major 0/1 values, length width*height. */
  cells: Uint8Array;
}

export function writeAsciiGrid(filePath: string, grid: BinaryGrid): void {
  const lines: string[] = [
    `ncols ${grid.width}`,
    `nrows ${grid.height}`,
    "xllcorner 0.0",
    "yllcorner 0.0",
    `cellsize ${grid.cellSize}`,
  ];
  for (let r = 0; r < grid.height; r++) {
    const row: string[] = [];
    for (let c = 0; c < grid.width; c++) {
      row.push(String(grid.cells[r * grid.width + c]));
    }
    lines.push(row.join(" "));
  }
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  fs.writeFileSync(filePath, lines.join("\n") + "\n");
}

const HEADER_KEYS = new Set([
  "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value",
]);

export function readAsciiGrid(filePath: string): BinaryGrid {
  const tokens = fs.readFileSync(filePath, "utf-8").split(/\s+/).filter(Boolean);
  const header: Record<string, number> = {};
  let pos = 0;
  while (pos + 1 < tokens.length && HEADER_KEYS.has(tokens[pos].toLowerCase())) {
    header[tokens[pos].toLowerCase()] = Number(tokens[pos + 1]);
    pos += 2;
  }
  for (const key of ["ncols", "nrows", "cellsize"]) {
    if (!(key in header) || !Number.isFinite(header[key])) {
      throw new Error(`${filePath}: missing or invalid header line '${key}'`);
    }
  }
  const width = header.ncols | 0;
  const height = header.nrows | 0;
  const body = tokens.slice(pos);
  if (body.length !== width * height) {
    throw new Error(
      `${filePath}: expected ${width * height} cells, found ${body.length}`,
    );
  }
  const nodata = header.nodata_value;
  const cells = new Uint8Array(width * height);
  for (let i = 0; i < body.length; i++) {
    const v = Number(body[i]);
    if (v === 0 || (nodata !== undefined && v === nodata)) {
      cells[i] = 0;
    } else if (v === 1) {
      cells[i] = 1;
    } else {
      const row = Math.floor(i / width);
      const col = i % width;
      throw new Error(`${filePath}: non-binary value ${body[i]} at row ${row}, column ${col}`);
    }
  }
  return { width, height, cellSize: header.cellsize, cells };
}

/** Nearest-neighbor resample to a square side (training-size harmonization). */
export function resizeGrid(grid: BinaryGrid, side: number): BinaryGrid {
  if (grid.width === side && grid.height === side) return grid;
  const cells = new Uint8Array(side * side);
  for (let r = 0; r < side; r++) {
    const sr = Math.min(grid.height - 1, Math.floor((r * grid.height) / side));
    for (let c = 0; c < side; c++) {
      const sc = Math.min(grid.width - 1, Math.floor((c * grid.width) / side));
      cells[r * side + c] = grid.cells[sr * grid.width + sc];
    }
  }
  return { width: side, height: side, cellSize: (grid.cellSize * grid.width) / side, cells };
}

export function occupiedFraction(grid: BinaryGrid): number {
  let n = 0;
  for (const v of grid.cells) n += v;
  return n / grid.cells.length;
}

export function listGridFiles(dir: string): string[] {
  return fs
    .readdirSync(dir)
    .filter((name) => name.endsWith(".asc") || name.endsWith(".txt"))
    .sort()
    .map((name) => path.join(dir, name));
}
