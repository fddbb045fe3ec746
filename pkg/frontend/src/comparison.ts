/**
 * Comparison view: two playback grids (max 8 tiles per side), per-tile
 * remove/transfer controls, and the verdict bar. Keyboard shortcuts:
 * 1 = left better, 2 = right better, s = skip.
 */
import { ApiClient } from "./api.js";
import { drawFrame, PlaybackClock } from "./playback.js";
import type { FramesDoc } from "./schemas.js";
import {
  canSubmit,
  removeBehavior,
  SelectionState,
  Side,
  transferBehavior,
} from "./selection.js";

const TILE_SIZE = 96;
const MAX_TILES = 8;

export interface ComparisonEvents {
  onSelectionChanged: (next: SelectionState) => void;
  onVerdict: (verdict: "g1_preferred" | "g2_preferred" | "skip") => void;
}

export class ComparisonView {
  private frameCache = new Map<string, FramesDoc>();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly sessionId: () => string,
    private readonly clock: PlaybackClock,
    private readonly events: ComparisonEvents,
  ) {}

  async render(selection: SelectionState): Promise<void> {
    this.root.textContent = "";
    const grids = document.createElement("div");
    grids.className = "comparison-grids";
    grids.append(
      await this.renderSide("left", selection),
      await this.renderSide("right", selection),
    );
    this.root.append(grids, this.renderVerdictBar(selection));
  }

  private async framesFor(id: string): Promise<FramesDoc> {
    let doc = this.frameCache.get(id);
    if (!doc) {
      doc = await this.api.frames(this.sessionId(), id);
      this.frameCache.set(id, doc);
    }
    return doc;
  }

  private async renderSide(side: Side, selection: SelectionState): Promise<HTMLElement> {
    const container = document.createElement("div");
    container.className = `side side-${side}`;
    const title = document.createElement("h3");
    title.textContent = side === "left" ? "Group A" : "Group B";
    container.append(title);
    const ids = [...(side === "left" ? selection.left : selection.right)].sort();
    let maxLen = 1;
    for (const id of ids.slice(0, MAX_TILES)) {
      const tile = document.createElement("div");
      tile.className = "tile";
      tile.dataset.behavior = id;
      const canvas = document.createElement("canvas");
      canvas.width = TILE_SIZE;
      canvas.height = TILE_SIZE;
      const doc = await this.framesFor(id);
      maxLen = Math.max(maxLen, doc.frames.length);
      const ctx = canvas.getContext("2d");
      if (ctx) {
        drawFrame(ctx, doc, this.clock.current, TILE_SIZE);
        this.clock.subscribe((frame) => drawFrame(ctx, doc, frame, TILE_SIZE));
      }
      const remove = document.createElement("button");
      remove.textContent = "remove";
      remove.addEventListener("click", () =>
        this.events.onSelectionChanged(removeBehavior(selection, side, id)),
      );
      const transfer = document.createElement("button");
      transfer.textContent = "transfer";
      transfer.addEventListener("click", () =>
        this.events.onSelectionChanged(transferBehavior(selection, side, id)),
      );
      tile.append(canvas, remove, transfer);
      container.append(tile);
    }
    this.clock.setMaxLength(maxLen);
    return container;
  }

  private renderVerdictBar(selection: SelectionState): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "verdict-bar";
    const submittable = canSubmit(selection);
    const buttons: Array<["g1_preferred" | "g2_preferred" | "skip", string]> = [
      ["g1_preferred", "left better (1)"],
      ["g2_preferred", "right better (2)"],
      ["skip", "skip (s)"],
    ];
    for (const [verdict, label] of buttons) {
      const button = document.createElement("button");
      button.textContent = label;
      button.dataset.verdict = verdict;
      button.disabled = !submittable;
      button.addEventListener("click", () => this.events.onVerdict(verdict));
      bar.append(button);
    }
    return bar;
  }

  clearCache(): void {
    this.frameCache.clear();
  }
}

export function bindVerdictShortcuts(
  target: Pick<Document, "addEventListener">,
  isSubmittable: () => boolean,
  onVerdict: ComparisonEvents["onVerdict"],
): void {
  target.addEventListener("keydown", (event) => {
    if (!isSubmittable()) return;
    const key = (event as KeyboardEvent).key;
    if (key === "1") onVerdict("g1_preferred");
    else if (key === "2") onVerdict("g2_preferred");
    else if (key === "s") onVerdict("skip");
  });
}
