/**
 * Thin typed client for the session service. Every response is validated
 * against the runtime schemas; mutating calls carry a request id so a
 * retried request replays instead of double-submitting.
 */
import {
  AdvanceResponseSchema,
  ComparisonResponseSchema,
  CurrentRound,
  CurrentRoundSchema,
  FramesDoc,
  FramesDocSchema,
  LayoutScene,
  LayoutSceneSchema,
  SessionCreatedSchema,
  Suggestion,
  SuggestionSchema,
  TrainingStatus,
  TrainingStatusSchema,
} from "./schemas.js";

export interface SessionConfigBody {
  env: "gridworld" | "mountaincar";
  behaviors_per_round?: number;
  segment_len?: number | null;
  rounds?: number;
  seed?: number;
}

export interface ComparisonBody {
  g1: string[];
  g2: string[];
  verdict: "g1_preferred" | "g2_preferred" | "skip" | "tie";
  origin?: "human" | "suggestion_accepted" | "dm";
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  private requestCounter = 0;

  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private nextRequestId(): string {
    this.requestCounter += 1;
    return `ui-${Date.now()}-${this.requestCounter}`;
  }

  private async call(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
  ): Promise<unknown | null> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    });
    if (response.status === 204) return null;
    if (!response.ok) {
      const detail = await response.text();
      throw new ApiError(response.status, `${method} ${path} -> ${response.status}: ${detail}`);
    }
    return response.json();
  }

  async createSession(config: SessionConfigBody): Promise<string> {
    const doc = await this.call("POST", "/sessions", {
      ...config,
      request_id: this.nextRequestId(),
    });
    return SessionCreatedSchema.parse(doc).session_id;
  }

  async currentRound(sessionId: string): Promise<CurrentRound> {
    const doc = await this.call("GET", `/sessions/${sessionId}/rounds/current`);
    return CurrentRoundSchema.parse(doc);
  }

  async layout(sessionId: string): Promise<LayoutScene> {
    const doc = await this.call("GET", `/sessions/${sessionId}/layout`);
    return LayoutSceneSchema.parse(doc);
  }

  async frames(sessionId: string, behaviorId: string): Promise<FramesDoc> {
    const doc = await this.call("GET", `/sessions/${sessionId}/behaviors/${behaviorId}/frames`);
    return FramesDocSchema.parse(doc);
  }

  async suggestion(sessionId: string, mode: "pair" | "group"): Promise<Suggestion | null> {
    const doc = await this.call("GET", `/sessions/${sessionId}/suggestions?mode=${mode}`);
    if (doc === null) return null;
    return SuggestionSchema.parse(doc);
  }

  async submitComparison(sessionId: string, body: ComparisonBody): Promise<number> {
    const doc = await this.call("POST", `/sessions/${sessionId}/comparisons`, {
      origin: "human",
      ...body,
      request_id: this.nextRequestId(),
    });
    return ComparisonResponseSchema.parse(doc).queries_generated;
  }

  async advanceRound(sessionId: string): Promise<void> {
    const doc = await this.call("POST", `/sessions/${sessionId}/rounds/advance`, {
      request_id: this.nextRequestId(),
    });
    AdvanceResponseSchema.parse(doc);
  }

  async trainingStatus(sessionId: string): Promise<TrainingStatus> {
    const doc = await this.call("GET", `/sessions/${sessionId}/training`);
    return TrainingStatusSchema.parse(doc);
  }

  async openApiSpec(): Promise<Record<string, unknown>> {
    return (await this.call("GET", "/spec")) as Record<string, unknown>;
  }
}
