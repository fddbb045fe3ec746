/**
 * Geometry helpers for the radial chart: the polar convention matches the
 * server (angle 0 at 12 o'clock, clockwise; radii normalized to [0,1]),
 * so the client only applies an affine map to pixels and tessellates the
 * bundled edges' uniform cubic B-splines.
 */
import type { Arc } from "./schemas.js";

export interface Viewport {
  cx: number;
  cy: number;
  scale: number; // pixels per unit radius
}

export function polarToScreen(radius: number, angle: number, vp: Viewport): [number, number] {
  return [vp.cx + radius * Math.sin(angle) * vp.scale, vp.cy - radius * Math.cos(angle) * vp.scale];
}

export function screenToPolar(x: number, y: number, vp: Viewport): [number, number] {
  const dx = (x - vp.cx) / vp.scale;
  const dy = (vp.cy - y) / vp.scale;
  const radius = Math.hypot(dx, dy);
  const angle = (Math.atan2(dx, dy) + 2 * Math.PI) % (2 * Math.PI);
  return [radius, angle];
}

export function hitTestArc(arcs: Arc[], radius: number, angle: number): Arc | null {
  for (const arc of arcs) {
    if (
      radius >= arc.inner_radius &&
      radius <= arc.outer_radius &&
      angle >= arc.start_angle &&
      angle < arc.end_angle
    ) {
      return arc;
    }
  }
  return null;
}

/**
 * Uniform cubic B-spline through the control polygon, endpoints clamped by
 * repeating the first and last points. Returns a polyline in polar space.
 */
export function tessellateBSpline(
  controlPoints: Array<[number, number]>,
  samplesPerSegment = 12,
): Array<[number, number]> {
  if (controlPoints.length < 2) return controlPoints.slice();
  const pts = controlPoints.map(([r, theta]) => [r * Math.sin(theta), r * Math.cos(theta)]);
  const padded = [pts[0], pts[0], ...pts, pts[pts.length - 1], pts[pts.length - 1]];
  const out: Array<[number, number]> = [];
  for (let i = 0; i + 3 < padded.length; i++) {
    const [p0, p1, p2, p3] = [padded[i], padded[i + 1], padded[i + 2], padded[i + 3]];
    for (let s = 0; s < samplesPerSegment; s++) {
      const t = s / samplesPerSegment;
      const t2 = t * t;
      const t3 = t2 * t;
      const b0 = (1 - 3 * t + 3 * t2 - t3) / 6;
      const b1 = (4 - 6 * t2 + 3 * t3) / 6;
      const b2 = (1 + 3 * t + 3 * t2 - 3 * t3) / 6;
      const b3 = t3 / 6;
      const x = b0 * p0[0] + b1 * p1[0] + b2 * p2[0] + b3 * p3[0];
      const y = b0 * p0[1] + b1 * p1[1] + b2 * p2[1] + b3 * p3[1];
      const radius = Math.hypot(x, y);
      const angle = (Math.atan2(x, y) + 2 * Math.PI) % (2 * Math.PI);
      out.push([radius, angle]);
    }
  }
  const last = pts[pts.length - 1];
  out.push([
    Math.hypot(last[0], last[1]),
    (Math.atan2(last[0], last[1]) + 2 * Math.PI) % (2 * Math.PI),
  ]);
  return out;
}

/** Leaf ids under a parent arc, resolved through the leaf arcs' angular spans. */
export function leavesUnderArc(arcs: Arc[], parent: Arc): string[] {
  const out: string[] = [];
  for (const arc of arcs) {
    if (arc.ring !== 0 || !arc.leaf_behavior) continue;
    const mid = (arc.start_angle + arc.end_angle) / 2;
    if (mid >= parent.start_angle && mid < parent.end_angle) out.push(arc.leaf_behavior);
  }
  return out;
}
