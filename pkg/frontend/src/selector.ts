/**
 * Path selection: hit-testing plan geometry in wall coordinates and
 * maintaining the pending per-drone assignment before confirmation.
 */

import type { PreviewPath } from "./protocol.js";

export function pointSegmentDistance(
  p: [number, number],
  a: [number, number],
  b: [number, number],
): number {
  const abx = b[0] - a[0];
  const aby = b[1] - a[1];
  const len2 = abx * abx + aby * aby;
  let t = len2 > 0 ? ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / len2 : 0;
  t = Math.max(0, Math.min(1, t));
  const dx = p[0] - (a[0] + t * abx);
  const dy = p[1] - (a[1] + t * aby);
  return Math.hypot(dx, dy);
}

export function distanceToPath(p: [number, number], path: PreviewPath): number {
  let best = Infinity;
  for (let i = 0; i + 1 < path.points.length; i++) {
    best = Math.min(best, pointSegmentDistance(p, path.points[i], path.points[i + 1]));
  }
  return best;
}

/** Nearest path id within `tolerance` meters of a wall-space click. */
export function hitTest(
  paths: PreviewPath[],
  p: [number, number],
  tolerance = 0.05,
): number | null {
  let bestId: number | null = null;
  let bestDist = tolerance;
  for (const path of paths) {
    const d = distanceToPath(p, path);
    if (d <= bestDist) {
      bestDist = d;
      bestId = path.id;
    }
  }
  return bestId;
}

/** Path ids whose every vertex lies inside a wall-space box selection. */
export function boxSelect(
  paths: PreviewPath[],
  corner1: [number, number],
  corner2: [number, number],
): number[] {
  const u0 = Math.min(corner1[0], corner2[0]);
  const u1 = Math.max(corner1[0], corner2[0]);
  const v0 = Math.min(corner1[1], corner2[1]);
  const v1 = Math.max(corner1[1], corner2[1]);
  const out: number[] = [];
  for (const path of paths) {
    const inside = path.points.every(
      ([u, v]) => u >= u0 && u <= u1 && v >= v0 && v <= v1,
    );
    if (inside) out.push(path.id);
  }
  return out;
}

export function toggle(selection: Set<number>, id: number): void {
  if (selection.has(id)) selection.delete(id);
  else selection.add(id);
}

/** ids not yet assigned to any drone (selectable without conflict). */
export function unassignedIds(
  paths: PreviewPath[],
  assignments: Record<string, number[]>,
): number[] {
  const taken = new Set<number>();
  for (const ids of Object.values(assignments)) {
    for (const id of ids) taken.add(id);
  }
  return paths.map((p) => p.id).filter((id) => !taken.has(id));
}
