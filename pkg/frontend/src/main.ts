/**
 * Browser wiring: one annotator session per page, driven by the query string
 * (?annotator=NAME&role=target_provider|preference_labeler&service=URL).
 * Keyboard shortcuts: left/right arrows choose a preference side, S requests
 * stop on a target task.
 */

import { AnnotationClient, Role, ROLE_PREFERENCE, ROLE_TARGET } from "./api.js";
import { pickTarget, renderError, renderTask, SceneView } from "./render.js";
import { TaskSchema } from "./schema.js";
import { AnnotationSession } from "./session.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

export function start(): void {
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator") ?? "anonymous";
  const roleParam = params.get("role");
  const role: Role = roleParam === ROLE_PREFERENCE ? ROLE_PREFERENCE : ROLE_TARGET;
  const service = params.get("service") ?? "http://127.0.0.1:8642";

  const canvas = byId<HTMLCanvasElement>("scene");
  const status = byId<HTMLElement>("status");
  const leftBtn = byId<HTMLButtonElement>("choose-left");
  const rightBtn = byId<HTMLButtonElement>("choose-right");
  const stopBtn = byId<HTMLButtonElement>("stop");
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("2d canvas unsupported");
  const view = { width: canvas.width, height: canvas.height };

  let current: SceneView | null = null;

  const session = new AnnotationSession(new AnnotationClient(service), annotator, role, {
    onTask: (task) => {
      current = null;
      if (task === null) {
        renderError(ctx, view, "no tasks left for this role");
        status.textContent = "queue empty";
        leftBtn.disabled = rightBtn.disabled = stopBtn.disabled = true;
        return;
      }
      const parsed = TaskSchema.safeParse(task);
      if (!parsed.success) {
        renderError(ctx, view, parsed.error.issues[0]?.message ?? "invalid payload");
        status.textContent = "malformed task";
        return;
      }
      current = renderTask(ctx, view, parsed.data);
      const isPref = parsed.data.phase === "preference";
      leftBtn.disabled = rightBtn.disabled = !isPref;
      stopBtn.disabled = isPref;
      status.textContent = isPref
        ? "choose the trajectory that is safer or more appropriate"
        : "click a target location, or press S to stop";
    },
    onNotice: (message) => {
      status.textContent = message;
    },
  });

  const guard = (fn: () => Promise<unknown>) => {
    fn().catch((err) => {
      status.textContent = String(err);
    });
  };

  canvas.addEventListener("click", (ev) => {
    if (current === null || current.task.phase !== "target") return;
    const rect = canvas.getBoundingClientRect();
    const [x, y] = pickTarget(current, ev.clientX - rect.left, ev.clientY - rect.top);
    guard(() => session.clickTarget(x, y));
  });
  leftBtn.addEventListener("click", () => guard(() => session.choose("left")));
  rightBtn.addEventListener("click", () => guard(() => session.choose("right")));
  stopBtn.addEventListener("click", () => guard(() => session.requestStop()));
  window.addEventListener("keydown", (ev) => {
    if (current === null) return;
    if (ev.key === "ArrowLeft" && current.task.phase === "preference") {
      guard(() => session.choose("left"));
    } else if (ev.key === "ArrowRight" && current.task.phase === "preference") {
      guard(() => session.choose("right"));
    } else if ((ev.key === "s" || ev.key === "S") && current.task.phase === "target") {
      guard(() => session.requestStop());
    }
  });

  guard(() => session.advance());
}

start();
