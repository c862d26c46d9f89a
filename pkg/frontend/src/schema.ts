/**
 * Zod schemas for every payload exchanged with the annotation service and for
 * the files it exports. Parsing happens at the boundary: anything malformed is
 * rejected before it can reach the renderer or a submission.
 */

import { z } from "zod";

const finite = z.number().finite();

export const PointSchema = z.tuple([finite, finite]);

/** A waypoint is [x, y, theta] in the ego frame of the observation. */
export const WaypointSchema = z.tuple([finite, finite, finite]);

export const SegmentSchema = z.tuple([PointSchema, PointSchema]);

export const CircleSchema = z.tuple([PointSchema, finite.positive()]);

export const AgentSchema = z.object({
  pos: PointSchema,
  radius: finite.positive(),
});

export const SceneSchema = z.object({
  segments: z.array(SegmentSchema),
  circles: z.array(CircleSchema),
  agents: z.array(AgentSchema),
  robot: WaypointSchema,
  goal_ego: PointSchema,
  bounds: z.tuple([finite, finite, finite, finite]).refine(
    (b) => b[2] > b[0] && b[3] > b[1],
    { message: "bounds must have positive extent" },
  ),
  dataset_traj: z.array(WaypointSchema).min(2),
});

export const CandidateKindSchema = z.enum([
  "dataset",
  "rotated_ccw",
  "rotated_cw",
  "human_target",
  "stop",
]);

export const DisplayedCandidateSchema = z.object({
  index: z.number().int().nonnegative(),
  kind: CandidateKindSchema,
  wps: z.array(WaypointSchema).min(1),
  color: z.string().regex(/^#[0-9a-fA-F]{6}$/),
});

export const PairSchema = z.object({
  candidates: z.array(DisplayedCandidateSchema).length(2),
});

export const TaskSchema = z
  .object({
    task_id: z.string().min(1),
    observation_id: z.string().min(1),
    phase: z.enum(["target", "preference"]),
    scene: SceneSchema,
    pair: PairSchema.nullable(),
  })
  .superRefine((task, ctx) => {
    if (task.phase === "preference" && task.pair === null) {
      ctx.addIssue({ code: z.ZodIssueCode.custom, message: "preference task needs a pair" });
    }
    if (task.phase === "target" && task.pair !== null) {
      ctx.addIssue({ code: z.ZodIssueCode.custom, message: "target task must not carry a pair" });
    }
    if (task.pair && task.pair.candidates[0]?.index === task.pair.candidates[1]?.index) {
      ctx.addIssue({ code: z.ZodIssueCode.custom, message: "pair must show two distinct candidates" });
    }
  });

export const TaskResponseSchema = z.object({
  task: TaskSchema.nullable(),
});

export const OkResponseSchema = z.object({ ok: z.literal(true) });

export const ErrorDetailSchema = z.object({
  detail: z.object({ code: z.string(), message: z.string() }),
});

/** One line of the exported preferences file. */
export const PreferenceRecordSchema = z
  .object({
    obs: z.string().min(1),
    i: z.number().int().nonnegative(),
    j: z.number().int().nonnegative(),
    y: z.union([z.literal(0), z.literal(1)]),
    annotator: z.string().min(1),
    source: z.enum(["human", "oracle"]),
  })
  .refine((r) => r.i !== r.j, { message: "a pair needs two distinct candidates" });

/** One line of the exported candidates file. */
export const CandidateSetSchema = z
  .object({
    obs: z.string().min(1),
    n: z.number().int().min(2),
    candidates: z
      .array(z.object({ kind: CandidateKindSchema, wps: z.array(WaypointSchema).min(1) }))
      .min(2),
  })
  .superRefine((cs, ctx) => {
    if (cs.candidates[0]?.kind !== "dataset") {
      ctx.addIssue({ code: z.ZodIssueCode.custom, message: "index 0 must be the dataset trajectory" });
    }
    for (const c of cs.candidates) {
      if (c.kind !== "stop" && c.wps.length !== cs.n) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `candidate has ${c.wps.length} waypoints, expected ${cs.n}`,
        });
      }
    }
  });

export const ExportSummarySchema = z.object({
  observations: z.number().int().nonnegative(),
  fully_labeled_observations: z.number().int().nonnegative(),
  counterfactuals_per_observation: z.number().int().positive(),
  total_candidates: z.number().int().nonnegative(),
  total_pairwise_comparisons: z.number().int().nonnegative(),
  records: z.number().int().nonnegative(),
});

export type Scene = z.infer<typeof SceneSchema>;
export type DisplayedCandidate = z.infer<typeof DisplayedCandidateSchema>;
export type AnnotationTask = z.infer<typeof TaskSchema>;
export type PreferenceRecord = z.infer<typeof PreferenceRecordSchema>;
export type CandidateSet = z.infer<typeof CandidateSetSchema>;
export type ExportSummary = z.infer<typeof ExportSummarySchema>;
