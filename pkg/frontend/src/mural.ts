/**
 * Wall-coordinate canvas view: planned paths, pending selection, live
 * drone markers with trails, and the painted-canvas overlay. Meters-true
 * aspect ratio with a light grid.
 */

import type { ConsoleState } from "./state.js";

const DRONE_COLORS = ["#2b8cff", "#ff7a2b", "#2bd58a", "#d52bd5"];

export interface ViewTransform {
  scale: number; // px per meter
  offsetX: number;
  offsetY: number;
  height: number;
}

export function fitTransform(
  wall: [number, number],
  width: number,
  height: number,
  pad = 20,
): ViewTransform {
  const scale = Math.min((width - 2 * pad) / wall[0], (height - 2 * pad) / wall[1]);
  return { scale, offsetX: pad, offsetY: pad, height };
}

export function wallToScreen(t: ViewTransform, u: number, v: number): [number, number] {
  return [t.offsetX + u * t.scale, t.height - t.offsetY - v * t.scale];
}

export function screenToWall(t: ViewTransform, x: number, y: number): [number, number] {
  return [(x - t.offsetX) / t.scale, (t.height - t.offsetY - y) / t.scale];
}

export function droneColor(index: number): string {
  return DRONE_COLORS[index % DRONE_COLORS.length];
}

export function renderMural(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  t: ViewTransform,
  overlay: HTMLImageElement | null,
): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  if (!state.preview) return;
  const wall = state.preview.wall;

  // wall outline and 0.5 m grid
  const [x0, y0] = wallToScreen(t, 0, wall[1]);
  ctx.fillStyle = "#f6f6f2";
  ctx.fillRect(x0, y0, wall[0] * t.scale, wall[1] * t.scale);
  ctx.strokeStyle = "#ddd";
  ctx.lineWidth = 1;
  for (let u = 0; u <= wall[0] + 1e-9; u += 0.5) {
    const [xa, ya] = wallToScreen(t, u, 0);
    const [xb, yb] = wallToScreen(t, u, wall[1]);
    ctx.beginPath();
    ctx.moveTo(xa, ya);
    ctx.lineTo(xb, yb);
    ctx.stroke();
  }
  for (let v = 0; v <= wall[1] + 1e-9; v += 0.5) {
    const [xa, ya] = wallToScreen(t, 0, v);
    const [xb, yb] = wallToScreen(t, wall[0], v);
    ctx.beginPath();
    ctx.moveTo(xa, ya);
    ctx.lineTo(xb, yb);
    ctx.stroke();
  }

  // painted-canvas reprojection overlay (toggleable, may be absent)
  if (overlay && state.showOverlay) {
    ctx.globalAlpha = 0.55;
    ctx.drawImage(overlay, x0, y0, wall[0] * t.scale, wall[1] * t.scale);
    ctx.globalAlpha = 1.0;
  }

  // planned paths: assignment-colored, pending selection highlighted
  const assignmentOf = new Map<number, number>();
  const namespaces = Object.keys(state.preview.assignments);
  namespaces.forEach((ns, i) => {
    for (const id of state.preview!.assignments[ns]) assignmentOf.set(id, i);
  });
  for (const path of state.preview.paths) {
    const owner = assignmentOf.get(path.id);
    const selected = state.selectedPaths.has(path.id);
    const conflicted = state.conflictIds.includes(path.id);
    ctx.strokeStyle = conflicted
      ? "#e03131"
      : selected
        ? "#111"
        : owner !== undefined
          ? droneColor(owner)
          : "#999";
    ctx.lineWidth = selected || conflicted ? 3 : path.kind === "outline" ? 2 : 1;
    ctx.beginPath();
    path.points.forEach(([u, v], i) => {
      const [x, y] = wallToScreen(t, u, v);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }

  // live positions and trails
  let idx = 0;
  for (const [ns, d] of state.drones) {
    const color = droneColor(idx++);
    if (d.trail.length > 1) {
      ctx.strokeStyle = color;
      ctx.globalAlpha = 0.5;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      d.trail.forEach(([u, v], i) => {
        const [x, y] = wallToScreen(t, u, v);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
      ctx.globalAlpha = 1.0;
    }
    if (d.lastFix) {
      const [x, y] = wallToScreen(t, d.lastFix.u, d.lastFix.v);
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(x, y, 6, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#222";
      ctx.font = "12px sans-serif";
      ctx.fillText(`${ns} (n=${d.lastFix.n.toFixed(2)})`, x + 9, y - 9);
    }
  }
}
