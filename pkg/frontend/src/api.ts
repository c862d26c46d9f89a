/**
 * Thin typed client over the annotation service HTTP endpoints. Responses are
 * schema-validated; service errors surface as ApiError with the service's
 * error code. Preference submissions are idempotent per task_id: a second
 * submission for the same task is swallowed locally and never hits the wire.
 */

import {
  AnnotationTask,
  ErrorDetailSchema,
  ExportSummary,
  ExportSummarySchema,
  OkResponseSchema,
  TaskResponseSchema,
} from "./schema.js";

export const ROLE_TARGET = "target_provider";
export const ROLE_PREFERENCE = "preference_labeler";

export type Role = typeof ROLE_TARGET | typeof ROLE_PREFERENCE;

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(`${code}: ${message}`);
    this.name = "ApiError";
  }
}

async function raiseFor(res: Response): Promise<never> {
  let code = "http-error";
  let message = `${res.status} ${res.statusText}`;
  try {
    const parsed = ErrorDetailSchema.safeParse(await res.json());
    if (parsed.success) {
      code = parsed.data.detail.code;
      message = parsed.data.detail.message;
    }
  } catch {
    // non-JSON body; keep the generic message
  }
  throw new ApiError(code, message, res.status);
}

export type SubmitResult = "submitted" | "duplicate";

export class AnnotationClient {
  private submittedTasks = new Set<string>();

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async post(path: string, body: unknown): Promise<void> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await raiseFor(res);
    OkResponseSchema.parse(await res.json());
  }

  async nextTask(annotator: string, role: Role): Promise<AnnotationTask | null> {
    const params = new URLSearchParams({ role, annotator });
    const res = await this.fetchImpl(`${this.baseUrl}/task?${params}`);
    if (!res.ok) await raiseFor(res);
    return TaskResponseSchema.parse(await res.json()).task;
  }

  async submitTarget(annotator: string, obs: string, x: number, y: number): Promise<void> {
    await this.post("/target", { annotator, obs, x, y, stop: false });
  }

  async submitStop(annotator: string, obs: string): Promise<void> {
    await this.post("/target", { annotator, obs, stop: true });
  }

  /**
   * Submit a preference choice (a true candidate index). Returns "duplicate"
   * without a network call if this task was already submitted from this
   * client, so a double click produces a single request.
   */
  async submitPreference(
    annotator: string,
    taskId: string,
    choice: number,
  ): Promise<SubmitResult> {
    if (this.submittedTasks.has(taskId)) return "duplicate";
    this.submittedTasks.add(taskId);
    try {
      await this.post("/preference", { annotator, task_id: taskId, choice });
    } catch (err) {
      // allow a retry after a failure; the service's own duplicate check
      // still protects against true double submission
      this.submittedTasks.delete(taskId);
      throw err;
    }
    return "submitted";
  }

  async exportDataset(): Promise<ExportSummary> {
    const res = await this.fetchImpl(`${this.baseUrl}/export`);
    if (!res.ok) await raiseFor(res);
    return ExportSummarySchema.parse(await res.json());
  }
}
