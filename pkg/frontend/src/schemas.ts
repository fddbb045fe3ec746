/**
 * Runtime schemas for every server payload the client touches.
 * The API client validates each response against these, so a drifting
 * server contract fails loudly instead of rendering garbage.
 */
import { z } from "zod";

export const ArcSchema = z
  .object({
    node_id: z.number().int(),
    ring: z.number().int().min(0),
    start_angle: z.number(),
    end_angle: z.number(),
    inner_radius: z.number(),
    outer_radius: z.number(),
    selectable: z.boolean(),
    leaf_behavior: z.string().optional(),
  })
  .strict();

export const EdgeSchema = z
  .object({
    endpoints: z.tuple([z.string(), z.string()]),
    kind: z.enum(["suggestion", "history"]),
    control_points: z.array(z.tuple([z.number(), z.number()])).min(2),
    verdict_color: z.tuple([z.string(), z.string()]).optional(),
  })
  .strict();

export const LayoutSceneSchema = z
  .object({
    arcs: z.array(ArcSchema),
    edges: z.array(EdgeSchema),
    leaf_angle: z.record(z.string(), z.number()),
    hub_radius: z.number(),
  })
  .strict();

export const CurrentRoundSchema = z
  .object({
    round_index: z.number().int().min(0),
    phase: z.enum(["idle", "collecting_feedback", "training", "finished"]),
    behavior_ids: z.array(z.string()),
    metrics_so_far: z.array(
      z
        .object({
          round: z.number().int(),
          comparisons: z.number().int(),
          queries: z.number().int(),
        })
        .strict(),
    ),
  })
  .strict();

export const GridFrameSchema = z
  .object({
    agent: z.tuple([z.number(), z.number()]),
    goal: z.tuple([z.number(), z.number()]),
  })
  .strict();

export const CarFrameSchema = z
  .object({ x: z.number(), height: z.number() })
  .strict();

export const FramesDocSchema = z.discriminatedUnion("env", [
  z.object({ env: z.literal("gridworld"), frames: z.array(GridFrameSchema) }).strict(),
  z.object({ env: z.literal("mountaincar"), frames: z.array(CarFrameSchema) }).strict(),
]);

export const PairSuggestionSchema = z
  .object({ mode: z.literal("pair"), a: z.string(), b: z.string() })
  .strict();

export const GroupSuggestionSchema = z
  .object({
    mode: z.literal("group"),
    node_1: z.number().int(),
    node_2: z.number().int(),
    leaves_1: z.array(z.string()).min(1).max(8),
    leaves_2: z.array(z.string()).min(1).max(8),
  })
  .strict();

export const SuggestionSchema = z.discriminatedUnion("mode", [
  PairSuggestionSchema,
  GroupSuggestionSchema,
]);

export const ComparisonResponseSchema = z
  .object({ queries_generated: z.number().int().min(0), comparison_id: z.string() })
  .strict();

export const SessionCreatedSchema = z.object({ session_id: z.string() }).strict();

export const TrainingStatusSchema = z
  .object({
    phase: z.enum(["idle", "collecting_feedback", "training", "finished"]),
    progress: z.number().min(0).max(1),
    error: z.string().optional(),
  })
  .strict();

export const AdvanceResponseSchema = z.object({ status: z.string() }).strict();

export type Arc = z.infer<typeof ArcSchema>;
export type Edge = z.infer<typeof EdgeSchema>;
export type LayoutScene = z.infer<typeof LayoutSceneSchema>;
export type CurrentRound = z.infer<typeof CurrentRoundSchema>;
export type FramesDoc = z.infer<typeof FramesDocSchema>;
export type Suggestion = z.infer<typeof SuggestionSchema>;
export type GroupSuggestion = z.infer<typeof GroupSuggestionSchema>;
export type TrainingStatus = z.infer<typeof TrainingStatusSchema>;
