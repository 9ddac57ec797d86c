/** Pure layout and validation for the BEV canvas: no DOM access here so
 * everything is unit-testable. Drawing happens in draw.ts. */

export interface GridMeta {
  rows: number;
  cols: number;
  cell_size_m: number;
}

export type RleRun = [number, number]; // [flat start, length], row-major

export interface RenderObject {
  object_id: number;
  position: [number, number];
  area: number;
  category: string | null;
  foreground_text: string;
  background_text: string;
  cells_bbox: [number, number, number, number] | null;
  cells_rle: RleRun[];
}

export interface RenderPayload {
  scene_token: string;
  grid: GridMeta;
  ego: { row: number; col: number };
  objects: RenderObject[];
  road_rle?: RleRun[];
  vehicle_rle?: RleRun[];
}

export class PayloadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'PayloadError';
  }
}

function fail(message: string): never {
  throw new PayloadError(message);
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === 'object' && v !== null && !Array.isArray(v);
}

function asInt(v: unknown, what: string): number {
  if (typeof v !== 'number' || !Number.isInteger(v)) fail(`${what} must be an integer`);
  return v;
}

function asFinite(v: unknown, what: string): number {
  if (typeof v !== 'number' || !Number.isFinite(v)) fail(`${what} must be a finite number`);
  return v;
}

function asString(v: unknown, what: string): string {
  if (typeof v !== 'string') fail(`${what} must be a string`);
  return v;
}

function parseRuns(v: unknown, nCells: number, what: string): RleRun[] {
  if (!Array.isArray(v)) fail(`${what} must be an array of [start, length] runs`);
  const runs: RleRun[] = [];
  let prevEnd = 0;
  for (let i = 0; i < v.length; i++) {
    const run = v[i];
    if (!Array.isArray(run) || run.length !== 2) fail(`${what}[${i}] must be [start, length]`);
    const start = asInt(run[0], `${what}[${i}] start`);
    const length = asInt(run[1], `${what}[${i}] length`);
    if (start < 0 || length < 1) fail(`${what}[${i}] has start ${start}, length ${length}`);
    if (start < prevEnd) fail(`${what}[${i}] overlaps or is out of order`);
    if (start + length > nCells) fail(`${what}[${i}] runs past the grid (${nCells} cells)`);
    prevEnd = start + length;
    runs.push([start, length]);
  }
  return runs;
}

function parseObject(v: unknown, grid: GridMeta, i: number): RenderObject {
  const what = `objects[${i}]`;
  if (!isRecord(v)) fail(`${what} must be an object`);
  const id = asInt(v.object_id, `${what}.object_id`);
  if (id < 1) fail(`${what}.object_id must be positive`);
  if (!Array.isArray(v.position) || v.position.length !== 2) {
    fail(`${what}.position must be [x, y]`);
  }
  const position: [number, number] = [
    asFinite(v.position[0], `${what}.position[0]`),
    asFinite(v.position[1], `${what}.position[1]`),
  ];
  const area = asFinite(v.area, `${what}.area`);
  if (area < 0) fail(`${what}.area is negative`);
  let bbox: [number, number, number, number] | null = null;
  if (v.cells_bbox !== null && v.cells_bbox !== undefined) {
    const b = v.cells_bbox;
    if (!Array.isArray(b) || b.length !== 4) fail(`${what}.cells_bbox must be [r0, c0, r1, c1]`);
    const vals = b.map((x, j) => asInt(x, `${what}.cells_bbox[${j}]`));
    const [r0, c0, r1, c1] = vals as [number, number, number, number];
    if (r0 < 0 || c0 < 0 || r1 >= grid.rows || c1 >= grid.cols || r0 > r1 || c0 > c1) {
      fail(`${what}.cells_bbox [${vals.join(', ')}] does not fit a ${grid.rows}x${grid.cols} grid`);
    }
    bbox = [r0, c0, r1, c1];
  }
  const category =
    v.category === null || v.category === undefined
      ? null
      : asString(v.category, `${what}.category`);
  return {
    object_id: id,
    position,
    area,
    category,
    foreground_text: asString(v.foreground_text, `${what}.foreground_text`),
    background_text: asString(v.background_text, `${what}.background_text`),
    cells_bbox: bbox,
    cells_rle: parseRuns(v.cells_rle, grid.rows * grid.cols, `${what}.cells_rle`),
  };
}

/** Validate a /render response; throws PayloadError naming the first defect. */
export function parseRenderPayload(data: unknown): RenderPayload {
  if (!isRecord(data)) fail('render payload must be a JSON object');
  const token = asString(data.scene_token, 'scene_token');
  if (!isRecord(data.grid)) fail('grid must be an object');
  const rows = asInt(data.grid.rows, 'grid.rows');
  const cols = asInt(data.grid.cols, 'grid.cols');
  const cellSize = asFinite(data.grid.cell_size_m, 'grid.cell_size_m');
  if (rows < 1 || cols < 1) fail(`grid is ${rows}x${cols}; both sides must be positive`);
  if (cellSize <= 0) fail('grid.cell_size_m must be positive');
  const grid: GridMeta = { rows, cols, cell_size_m: cellSize };
  if (!isRecord(data.ego)) fail('ego must be an object');
  const egoRow = asFinite(data.ego.row, 'ego.row');
  const egoCol = asFinite(data.ego.col, 'ego.col');
  if (egoRow < 0 || egoRow >= rows || egoCol < 0 || egoCol >= cols) {
    fail(`ego (${egoRow}, ${egoCol}) lies outside the grid`);
  }
  if (!Array.isArray(data.objects)) fail('objects must be an array');
  const objects = data.objects.map((o, i) => parseObject(o, grid, i));
  const seen = new Set<number>();
  for (const o of objects) {
    if (seen.has(o.object_id)) fail(`duplicate object_id ${o.object_id}`);
    seen.add(o.object_id);
  }
  const payload: RenderPayload = {
    scene_token: token,
    grid,
    ego: { row: egoRow, col: egoCol },
    objects,
  };
  if (data.road_rle !== undefined) {
    payload.road_rle = parseRuns(data.road_rle, rows * cols, 'road_rle');
  }
  if (data.vehicle_rle !== undefined) {
    payload.vehicle_rle = parseRuns(data.vehicle_rle, rows * cols, 'vehicle_rle');
  }
  return payload;
}

/** Ids present in the payload; the only ids the UI may highlight. */
export function payloadIds(payload: RenderPayload): Set<number> {
  return new Set(payload.objects.map((o) => o.object_id));
}

// ---------------------------------------------------------------- viewport

export interface Viewport {
  scale: number; // 1 = whole grid fits the shorter canvas side
  panX: number; // canvas px
  panY: number;
}

export const MIN_SCALE = 0.5;
export const MAX_SCALE = 40;

export function defaultViewport(): Viewport {
  return { scale: 1, panX: 0, panY: 0 };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

export function panBy(vp: Viewport, dx: number, dy: number): Viewport {
  return { scale: vp.scale, panX: vp.panX + dx, panY: vp.panY + dy };
}

/** Zoom by a factor keeping one canvas point fixed. The anchor (ax, ay) is
 * measured from the canvas center, which is the fixed point of frameFor's
 * scale-dependent centering term. */
export function zoomAt(vp: Viewport, factor: number, ax: number, ay: number): Viewport {
  const scale = clamp(vp.scale * factor, MIN_SCALE, MAX_SCALE);
  const applied = scale / vp.scale;
  return {
    scale,
    panX: ax - (ax - vp.panX) * applied,
    panY: ay - (ay - vp.panY) * applied,
  };
}

export interface Frame {
  cellPx: number;
  originX: number; // canvas x of cell column 0
  originY: number; // canvas y of cell row 0
}

/** Row 0 (far front) at the top, column 0 (far left) on the left. */
export function frameFor(grid: GridMeta, vp: Viewport, width: number, height: number): Frame {
  const fit = Math.min(width / grid.cols, height / grid.rows);
  const cellPx = fit * vp.scale;
  return {
    cellPx,
    originX: width / 2 - (grid.cols / 2) * cellPx + vp.panX,
    originY: height / 2 - (grid.rows / 2) * cellPx + vp.panY,
  };
}

export function cellToCanvas(frame: Frame, row: number, col: number): { x: number; y: number } {
  return { x: frame.originX + col * frame.cellPx, y: frame.originY + row * frame.cellPx };
}

export function canvasToCell(
  frame: Frame,
  x: number,
  y: number,
): { row: number; col: number } {
  return {
    row: Math.floor((y - frame.originY) / frame.cellPx),
    col: Math.floor((x - frame.originX) / frame.cellPx),
  };
}

// ------------------------------------------------------------------ layout

export interface Segment {
  row: number;
  col: number;
  length: number; // cells, contiguous within one row
}

/** Split flat row-major runs into per-row segments for strip drawing. */
export function runsToSegments(runs: RleRun[], cols: number): Segment[] {
  const segments: Segment[] = [];
  for (const [start, length] of runs) {
    let flat = start;
    let left = length;
    while (left > 0) {
      const row = Math.floor(flat / cols);
      const col = flat % cols;
      const take = Math.min(left, cols - col);
      segments.push({ row, col, length: take });
      flat += take;
      left -= take;
    }
  }
  return segments;
}

export interface ObjectShape {
  objectId: number;
  rect: { x: number; y: number; w: number; h: number };
  label: string;
  labelX: number;
  labelY: number;
  highlighted: boolean;
  selected: boolean;
}

export interface SceneLayout {
  frame: Frame;
  roadSegments: Segment[];
  vehicleSegments: Segment[];
  objects: ObjectShape[];
  ego: { x: number; y: number; r: number };
}

export function layoutScene(
  payload: RenderPayload,
  highlighted: ReadonlySet<number>,
  selected: number | null,
  vp: Viewport,
  width: number,
  height: number,
): SceneLayout {
  const frame = frameFor(payload.grid, vp, width, height);
  const objects: ObjectShape[] = [];
  for (const obj of payload.objects) {
    if (!obj.cells_bbox) continue;
    const [r0, c0, r1, c1] = obj.cells_bbox;
    const tl = cellToCanvas(frame, r0, c0);
    objects.push({
      objectId: obj.object_id,
      rect: {
        x: tl.x,
        y: tl.y,
        w: (c1 - c0 + 1) * frame.cellPx,
        h: (r1 - r0 + 1) * frame.cellPx,
      },
      label: String(obj.object_id),
      labelX: tl.x + 2,
      labelY: tl.y - 2,
      highlighted: highlighted.has(obj.object_id),
      selected: selected === obj.object_id,
    });
  }
  // ego row/col are continuous indices; +0.5 lands on the cell-center line
  const egoPt = cellToCanvas(frame, payload.ego.row + 0.5, payload.ego.col + 0.5);
  return {
    frame,
    roadSegments: runsToSegments(payload.road_rle ?? [], payload.grid.cols),
    vehicleSegments: runsToSegments(payload.vehicle_rle ?? [], payload.grid.cols),
    objects,
    ego: { x: egoPt.x, y: egoPt.y, r: Math.max(3, frame.cellPx * 1.5) },
  };
}

/** Object id whose cells contain the canvas point, or null. */
export function hitTest(
  payload: RenderPayload,
  vp: Viewport,
  width: number,
  height: number,
  x: number,
  y: number,
): number | null {
  const frame = frameFor(payload.grid, vp, width, height);
  const { row, col } = canvasToCell(frame, x, y);
  if (row < 0 || row >= payload.grid.rows || col < 0 || col >= payload.grid.cols) return null;
  const flat = row * payload.grid.cols + col;
  for (const obj of payload.objects) {
    for (const [start, length] of obj.cells_rle) {
      if (flat >= start && flat < start + length) return obj.object_id;
    }
  }
  return null;
}
