/**
 * Canvas renderer and interaction layer for the exploration view: the
 * radial chart with bundled suggestion/history edges. Arcs are
 * hit-testable; clicking a parent selects its leaf set for the active
 * side, clicking a leaf toggles it, clicking near a suggestion edge loads
 * both endpoints.
 */
import { hitTestArc, leavesUnderArc, polarToScreen, screenToPolar, tessellateBSpline, Viewport } from "./radial.js";
import type { Arc, Edge, LayoutScene } from "./schemas.js";
import { SelectionState, group as selectionGroup, selectParent, toggleLeaf } from "./selection.js";

const SUGGESTION_COLOR = "#9e9e9e";
const LEAF_FILL = "#b3c7e6";
const PARENT_FILL = "#d9e2f1";
const OUTLINE_LEFT = "#2e7d32";
const OUTLINE_RIGHT = "#c62828";

export interface ExplorationEvents {
  onSelectionChanged?: (leaves: string[]) => void;
  onSuggestionClicked?: (edge: Edge) => void;
}

export class ExplorationView {
  private scene: LayoutScene | null = null;
  private viewport: Viewport;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly events: ExplorationEvents = {},
  ) {
    const size = Math.min(canvas.width, canvas.height);
    this.viewport = { cx: canvas.width / 2, cy: canvas.height / 2, scale: size / 2 - 8 };
  }

  setScene(scene: LayoutScene): void {
    this.scene = scene;
  }

  render(selection: SelectionState): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.scene) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    for (const edge of this.scene.edges) this.drawEdge(ctx, edge);
    for (const arc of this.scene.arcs) this.drawArc(ctx, arc, selection);
  }

  private drawArc(ctx: CanvasRenderingContext2D, arc: Arc, selection: SelectionState): void {
    const { cx, cy, scale } = this.viewport;
    // canvas arcs measure from 3 o'clock counter-clockwise; our angles are
    // from 12 o'clock clockwise, so shift by -pi/2
    const a0 = arc.start_angle - Math.PI / 2;
    const a1 = arc.end_angle - Math.PI / 2;
    ctx.beginPath();
    ctx.arc(cx, cy, arc.outer_radius * scale, a0, a1);
    ctx.arc(cx, cy, arc.inner_radius * scale, a1, a0, true);
    ctx.closePath();
    ctx.fillStyle = arc.ring === 0 ? LEAF_FILL : PARENT_FILL;
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1;
    ctx.stroke();
    if (arc.leaf_behavior) {
      if (selectionGroup(selection, "left").has(arc.leaf_behavior)) {
        ctx.strokeStyle = OUTLINE_LEFT;
        ctx.lineWidth = 2.5;
        ctx.stroke();
      } else if (selectionGroup(selection, "right").has(arc.leaf_behavior)) {
        ctx.strokeStyle = OUTLINE_RIGHT;
        ctx.lineWidth = 2.5;
        ctx.stroke();
      }
    }
  }

  private drawEdge(ctx: CanvasRenderingContext2D, edge: Edge): void {
    const polyline = tessellateBSpline(edge.control_points);
    const pixels = polyline.map(([r, theta]) => polarToScreen(r, theta, this.viewport));
    if (pixels.length < 2) return;
    if (edge.kind === "history" && edge.verdict_color) {
      const [x0, y0] = pixels[0];
      const [x1, y1] = pixels[pixels.length - 1];
      const gradient = ctx.createLinearGradient(x0, y0, x1, y1);
      gradient.addColorStop(0, edge.verdict_color[0]);
      gradient.addColorStop(1, edge.verdict_color[1]);
      ctx.strokeStyle = gradient;
    } else {
      ctx.strokeStyle = SUGGESTION_COLOR;
    }
    ctx.lineWidth = edge.kind === "suggestion" ? 1.5 : 1.0;
    ctx.globalAlpha = 0.75;
    ctx.beginPath();
    ctx.moveTo(pixels[0][0], pixels[0][1]);
    for (const [x, y] of pixels.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
    ctx.globalAlpha = 1.0;
  }

  /** Resolve a click to a selection change; returns the new selection. */
  handleClick(x: number, y: number, selection: SelectionState): SelectionState {
    if (!this.scene) return selection;
    const [radius, angle] = screenToPolar(x, y, this.viewport);
    if (radius < this.scene.hub_radius) {
      const edge = this.nearestSuggestionEdge(x, y);
      if (edge && this.events.onSuggestionClicked) this.events.onSuggestionClicked(edge);
      return selection;
    }
    const arc = hitTestArc(this.scene.arcs, radius, angle);
    if (!arc || !arc.selectable) return selection;
    if (arc.leaf_behavior) {
      return toggleLeaf(selection, arc.leaf_behavior);
    }
    const leaves = leavesUnderArc(this.scene.arcs, arc);
    const next = selectParent(selection, leaves);
    if (this.events.onSelectionChanged) this.events.onSelectionChanged(leaves);
    return next;
  }

  private nearestSuggestionEdge(x: number, y: number): Edge | null {
    if (!this.scene) return null;
    let best: Edge | null = null;
    let bestDist = 12; // pixel tolerance
    for (const edge of this.scene.edges) {
      if (edge.kind !== "suggestion") continue;
      for (const [r, theta] of tessellateBSpline(edge.control_points, 6)) {
        const [px, py] = polarToScreen(r, theta, this.viewport);
        const dist = Math.hypot(px - x, py - y);
        if (dist < bestDist) {
          bestDist = dist;
          best = edge;
        }
      }
    }
    return best;
  }
}
