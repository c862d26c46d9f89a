/**
 * Per-annotator session state machine. The session is stateless beyond the
 * current task: it fetches one task at a time, maps UI gestures (clicks,
 * left/right choices, stop) to service submissions, and advances. At most one
 * submission is in flight; a stale-task response is surfaced through onNotice
 * and the session simply fetches the next task.
 */

import { AnnotationClient, ApiError, Role, ROLE_PREFERENCE, ROLE_TARGET } from "./api.js";
import { AnnotationTask, DisplayedCandidate } from "./schema.js";
import { inBounds } from "./transform.js";

export type Side = "left" | "right";

export type SessionState = "idle" | "annotating" | "submitting" | "done";

/** The candidate currently shown on a given side, in displayed order. */
export function displayedCandidate(task: AnnotationTask, side: Side): DisplayedCandidate {
  if (task.phase !== "preference" || task.pair === null) {
    throw new Error("not a preference task");
  }
  const c = task.pair.candidates[side === "left" ? 0 : 1];
  if (c === undefined) throw new Error("malformed pair");
  return c;
}

/** Map a chosen side through the randomized presentation back to the true index. */
export function choiceToIndex(task: AnnotationTask, side: Side): number {
  return displayedCandidate(task, side).index;
}

export interface SessionEvents {
  onTask?: (task: AnnotationTask | null) => void;
  onNotice?: (message: string) => void;
}

export class AnnotationSession {
  state: SessionState = "idle";
  current: AnnotationTask | null = null;

  constructor(
    private readonly client: AnnotationClient,
    readonly annotator: string,
    readonly role: Role,
    private readonly events: SessionEvents = {},
  ) {}

  /** Fetch the next task for this annotator's role; null means the queue is empty. */
  async advance(): Promise<AnnotationTask | null> {
    this.current = await this.client.nextTask(this.annotator, this.role);
    this.state = this.current === null ? "done" : "annotating";
    this.events.onTask?.(this.current);
    return this.current;
  }

  /**
   * Submit a scene-frame click as the target for the current target task.
   * Out-of-bounds clicks produce a notice and submit nothing.
   */
  async clickTarget(x: number, y: number): Promise<boolean> {
    const task = this.requireTask("target", ROLE_TARGET);
    const [xmin, ymin, xmax, ymax] = task.scene.bounds;
    if (!inBounds({ xmin, ymin, xmax, ymax }, x, y)) {
      this.events.onNotice?.(`click (${x.toFixed(2)}, ${y.toFixed(2)}) is outside the scene`);
      return false;
    }
    await this.submitGuarded(() =>
      this.client.submitTarget(this.annotator, task.observation_id, x, y),
    );
    return true;
  }

  /** Request the stop candidate instead of a clicked target. */
  async requestStop(): Promise<void> {
    const task = this.requireTask("target", ROLE_TARGET);
    await this.submitGuarded(() => this.client.submitStop(this.annotator, task.observation_id));
  }

  /**
   * Choose one displayed side of the current preference pair. The submission
   * carries the true candidate index behind that side, so it can only ever
   * reference indices present in the displayed task.
   */
  async choose(side: Side): Promise<void> {
    const task = this.requireTask("preference", ROLE_PREFERENCE);
    const choice = choiceToIndex(task, side);
    await this.submitGuarded(async () => {
      const result = await this.client.submitPreference(this.annotator, task.task_id, choice);
      if (result === "duplicate") {
        this.events.onNotice?.("already submitted; waiting for the next task");
      }
    });
  }

  private requireTask(phase: AnnotationTask["phase"], role: Role): AnnotationTask {
    if (this.role !== role) throw new Error(`session role is ${this.role}, not ${role}`);
    if (this.state === "submitting") throw new Error("a submission is already in flight");
    if (this.current === null || this.current.phase !== phase) {
      throw new Error(`no ${phase} task is displayed`);
    }
    return this.current;
  }

  private async submitGuarded(submit: () => Promise<void>): Promise<void> {
    this.state = "submitting";
    try {
      await submit();
    } catch (err) {
      if (err instanceof ApiError && (err.code === "stale-task" || err.code === "duplicate-record")) {
        // someone else answered or the lease expired; move on
        this.events.onNotice?.(err.message);
        await this.advance();
        return;
      }
      this.state = "annotating";
      throw err;
    }
    await this.advance();
  }
}
