/**
 * Application wiring: one session, the exploration canvas on the left,
 * the comparison view and session controls on the right.
 */
import { ApiClient } from "./api.js";
import { bindVerdictShortcuts, ComparisonView } from "./comparison.js";
import { SessionControls } from "./controls.js";
import { ExplorationView } from "./exploration.js";
import { PlaybackClock } from "./playback.js";
import {
  canSubmit,
  emptySelection,
  loadSuggestion,
  SelectionState,
} from "./selection.js";

export interface AppConfig {
  baseUrl: string;
  token: string;
  env: "gridworld" | "mountaincar";
}

export class App {
  readonly api: ApiClient;
  private sessionId = "";
  private selection: SelectionState = emptySelection();
  private exploration!: ExplorationView;
  private comparison!: ComparisonView;
  private controls!: SessionControls;
  private readonly clock = new PlaybackClock(10);

  constructor(
    private readonly doc: Document,
    config: AppConfig,
  ) {
    this.api = new ApiClient(config.baseUrl, config.token);
  }

  async start(env: "gridworld" | "mountaincar" = "gridworld"): Promise<void> {
    this.sessionId = await this.api.createSession({ env });
    const canvas = this.doc.getElementById("exploration-canvas") as HTMLCanvasElement;
    this.exploration = new ExplorationView(canvas, {
      onSuggestionClicked: (edge) => {
        this.selection = loadSuggestion(this.selection, [edge.endpoints[0]], [edge.endpoints[1]]);
        void this.refresh();
      },
    });
    this.comparison = new ComparisonView(
      this.doc.getElementById("comparison-root") as HTMLElement,
      this.api,
      () => this.sessionId,
      this.clock,
      {
        onSelectionChanged: (next) => {
          this.selection = next;
          void this.refresh();
        },
        onVerdict: (verdict) => void this.submitVerdict(verdict),
      },
    );
    this.controls = new SessionControls(
      this.doc.getElementById("controls-root") as HTMLElement,
      this.api,
      () => this.sessionId,
      () => void this.onRoundAdvanced(),
    );
    canvas.addEventListener("click", (event) => {
      const rect = canvas.getBoundingClientRect();
      const mouse = event as MouseEvent;
      this.selection = this.exploration.handleClick(
        mouse.clientX - rect.left,
        mouse.clientY - rect.top,
        this.selection,
      );
      void this.refresh();
    });
    bindVerdictShortcuts(
      this.doc,
      () => canSubmit(this.selection),
      (verdict) => void this.submitVerdict(verdict),
    );
    const suggestButton = this.doc.getElementById("load-suggestion");
    suggestButton?.addEventListener("click", () => void this.loadGroupSuggestion());
    this.clock.start();
    await this.refresh();
  }

  async loadGroupSuggestion(): Promise<void> {
    const suggestion = await this.api.suggestion(this.sessionId, "group");
    if (suggestion && suggestion.mode === "group") {
      this.selection = loadSuggestion(this.selection, suggestion.leaves_1, suggestion.leaves_2);
    }
    await this.refresh();
  }

  async submitVerdict(verdict: "g1_preferred" | "g2_preferred" | "skip"): Promise<void> {
    if (!canSubmit(this.selection)) return;
    const g1 = [...this.selection.left].sort();
    const g2 = [...this.selection.right].sort();
    const generated = await this.api.submitComparison(this.sessionId, {
      g1,
      g2,
      verdict,
      origin: this.selection.origin === "suggestion" ? "suggestion_accepted" : "human",
    });
    this.controls.recordComparison({
      comparisonId: `#${this.controls.historyRows().length + 1}`,
      sizes: [g1.length, g2.length],
      verdict,
      queriesGenerated: generated,
    });
    this.selection = emptySelection();
    await this.refresh();
  }

  private async onRoundAdvanced(): Promise<void> {
    this.comparison.clearCache();
    this.selection = emptySelection();
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const scene = await this.api.layout(this.sessionId);
    this.exploration.setScene(scene);
    this.exploration.render(this.selection);
    await this.comparison.render(this.selection);
  }
}

declare global {
  interface Window {
    preflabApp?: App;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const params = new URLSearchParams(window.location.search);
  if (params.get("autostart") === "1") {
    const app = new App(document, {
      baseUrl: params.get("base") ?? "http://127.0.0.1:8000",
      token: params.get("token") ?? "dev-token",
      env: (params.get("env") as "gridworld" | "mountaincar") ?? "gridworld",
    });
    window.preflabApp = app;
    void app.start();
  }
}
