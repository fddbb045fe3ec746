/**
 * Session controls: advance button with training progress polling and the
 * comparison history panel. The progress poll runs at 1 Hz while training.
 */
import { ApiClient } from "./api.js";

export interface HistoryRow {
  comparisonId: string;
  sizes: [number, number];
  verdict: string;
  queriesGenerated: number;
}

export class SessionControls {
  private history: HistoryRow[] = [];
  private polling = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly sessionId: () => string,
    private readonly onRoundAdvanced: () => void,
  ) {}

  recordComparison(row: HistoryRow): void {
    this.history.push(row);
    this.render("collecting_feedback", 0);
  }

  historyRows(): HistoryRow[] {
    return this.history.slice();
  }

  async advance(): Promise<void> {
    await this.api.advanceRound(this.sessionId());
    this.history = [];
    await this.pollUntilDone();
  }

  private async pollUntilDone(): Promise<void> {
    this.polling = true;
    for (;;) {
      const status = await this.api.trainingStatus(this.sessionId());
      this.render(status.phase, status.progress);
      if (status.error) throw new Error(status.error);
      if (status.phase !== "training") break;
      await new Promise((resolve) => setTimeout(resolve, 1000));
    }
    this.polling = false;
    this.onRoundAdvanced();
  }

  render(phase: string, progress: number): void {
    this.root.textContent = "";
    const button = document.createElement("button");
    button.id = "advance-round";
    button.textContent = "finish round & retrain";
    button.disabled = phase === "training" || phase === "finished" || this.polling;
    button.addEventListener("click", () => void this.advance());
    const bar = document.createElement("progress");
    bar.max = 1;
    bar.value = progress;
    const label = document.createElement("span");
    label.className = "phase-label";
    label.textContent = phase;
    const panel = document.createElement("ul");
    panel.className = "history-panel";
    for (const row of this.history) {
      const item = document.createElement("li");
      item.textContent =
        `${row.comparisonId}: ${row.sizes[0]} vs ${row.sizes[1]} -> ${row.verdict} ` +
        `(${row.queriesGenerated} labels)`;
      panel.append(item);
    }
    this.root.append(button, bar, label, panel);
  }
}
