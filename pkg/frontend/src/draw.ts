/** Canvas drawing of a SceneLayout. Kept free of app logic: everything
 * position-related was already decided in render.ts. */

import { Frame, SceneLayout, Segment } from './render.js';

const COLORS = {
  background: '#10141a',
  gridBorder: '#2e3846',
  road: '#232c38',
  vehicle: '#46536b',
  object: '#7fa6d9',
  objectFill: 'rgba(127, 166, 217, 0.18)',
  highlight: '#ffb454',
  highlightFill: 'rgba(255, 180, 84, 0.30)',
  selected: '#ff6b6b',
  ego: '#4ade80',
  label: '#dbe4f0',
};

function drawSegments(
  ctx: CanvasRenderingContext2D,
  frame: Frame,
  segments: Segment[],
  color: string,
): void {
  ctx.fillStyle = color;
  for (const seg of segments) {
    ctx.fillRect(
      frame.originX + seg.col * frame.cellPx,
      frame.originY + seg.row * frame.cellPx,
      seg.length * frame.cellPx,
      frame.cellPx,
    );
  }
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  layout: SceneLayout,
  width: number,
  height: number,
  gridRows: number,
  gridCols: number,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);

  const { frame } = layout;
  ctx.strokeStyle = COLORS.gridBorder;
  ctx.lineWidth = 1;
  ctx.strokeRect(frame.originX, frame.originY, gridCols * frame.cellPx, gridRows * frame.cellPx);

  drawSegments(ctx, frame, layout.roadSegments, COLORS.road);
  drawSegments(ctx, frame, layout.vehicleSegments, COLORS.vehicle);

  ctx.font = `${Math.max(10, frame.cellPx * 2)}px system-ui, sans-serif`;
  ctx.textBaseline = 'bottom';
  for (const obj of layout.objects) {
    const stroke = obj.selected ? COLORS.selected : obj.highlighted ? COLORS.highlight : COLORS.object;
    ctx.fillStyle = obj.highlighted ? COLORS.highlightFill : COLORS.objectFill;
    ctx.fillRect(obj.rect.x, obj.rect.y, obj.rect.w, obj.rect.h);
    ctx.strokeStyle = stroke;
    ctx.lineWidth = obj.highlighted || obj.selected ? 2.5 : 1.5;
    ctx.strokeRect(obj.rect.x, obj.rect.y, obj.rect.w, obj.rect.h);
    ctx.fillStyle = obj.highlighted ? COLORS.highlight : COLORS.label;
    ctx.fillText(obj.label, obj.labelX, obj.labelY);
  }

  // ego as a forward-pointing triangle (row 0 is far front, i.e. up)
  const { x, y, r } = layout.ego;
  ctx.fillStyle = COLORS.ego;
  ctx.beginPath();
  ctx.moveTo(x, y - r);
  ctx.lineTo(x - r * 0.7, y + r * 0.8);
  ctx.lineTo(x + r * 0.7, y + r * 0.8);
  ctx.closePath();
  ctx.fill();
}
