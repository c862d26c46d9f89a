/**
 * Deterministic top-down scene rendering. Drawing goes through a minimal 2D
 * context interface (a structural subset of CanvasRenderingContext2D) so tests
 * can record operations without a browser.
 *
 * Layers, back to front: background, static geometry, moving agents, robot,
 * goal marker, then phase-specific overlays. Trajectory colors come from the
 * task payload (a neutral palette picked by the service) and never encode a
 * good/bad judgement.
 */

import { AnnotationTask, DisplayedCandidate, Scene } from "./schema.js";
import { CanvasTransform, Viewport } from "./transform.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

const COLOR_BACKGROUND = "#fafafa";
const COLOR_STATIC = "#444444";
const COLOR_AGENT = "#b05a5a";
const COLOR_ROBOT = "#222222";
const COLOR_GOAL = "#2e8540";
const COLOR_DATASET_FAINT = "#b8c4d8";
const COLOR_ERROR = "#a03030";

export const STOP_ARC_EPS = 1e-6;

export interface SceneView {
  transform: CanvasTransform;
  task: AnnotationTask;
}

/** Ego-frame point to scene (odom) frame via the robot pose. */
export function egoToScene(
  robot: [number, number, number],
  ex: number,
  ey: number,
): [number, number] {
  const [rx, ry, th] = robot;
  const c = Math.cos(th);
  const s = Math.sin(th);
  return [rx + c * ex - s * ey, ry + s * ex + c * ey];
}

/** A stop candidate never moves: its ego-frame arc length is ~zero. */
export function isStopCandidate(c: DisplayedCandidate): boolean {
  let arc = 0;
  for (let k = 1; k < c.wps.length; k++) {
    const a = c.wps[k - 1]!;
    const b = c.wps[k]!;
    arc += Math.hypot(b[0] - a[0], b[1] - a[1]);
  }
  arc += Math.hypot(c.wps[0]![0], c.wps[0]![1]);
  return arc < STOP_ARC_EPS;
}

function drawPolyline(
  ctx: Ctx2D,
  tf: CanvasTransform,
  robot: [number, number, number],
  wps: [number, number, number][],
  color: string,
  width: number,
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  wps.forEach((wp, k) => {
    const [sx, sy] = egoToScene(robot, wp[0], wp[1]);
    const [px, py] = tf.toPx(sx, sy);
    if (k === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function drawEndpointMarker(
  ctx: Ctx2D,
  tf: CanvasTransform,
  robot: [number, number, number],
  wp: [number, number, number],
  color: string,
): void {
  const [sx, sy] = egoToScene(robot, wp[0], wp[1]);
  const [px, py] = tf.toPx(sx, sy);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(px, py, 5, 0, 2 * Math.PI);
  ctx.fill();
}

function drawScene(ctx: Ctx2D, tf: CanvasTransform, scene: Scene, view: Viewport): void {
  ctx.fillStyle = COLOR_BACKGROUND;
  ctx.fillRect(0, 0, view.width, view.height);

  ctx.strokeStyle = COLOR_STATIC;
  ctx.lineWidth = 2;
  for (const [a, b] of scene.segments) {
    ctx.beginPath();
    const [ax, ay] = tf.toPx(a[0], a[1]);
    const [bx, by] = tf.toPx(b[0], b[1]);
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
  ctx.fillStyle = COLOR_STATIC;
  for (const [c, r] of scene.circles) {
    const [px, py] = tf.toPx(c[0], c[1]);
    ctx.beginPath();
    ctx.arc(px, py, tf.metersToPx(r), 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.fillStyle = COLOR_AGENT;
  for (const agent of scene.agents) {
    const [px, py] = tf.toPx(agent.pos[0], agent.pos[1]);
    ctx.beginPath();
    ctx.arc(px, py, tf.metersToPx(agent.radius), 0, 2 * Math.PI);
    ctx.fill();
  }

  // robot: heading triangle
  const [rx, ry, th] = scene.robot;
  const tip = egoToScene([rx, ry, th], 0.25, 0);
  const left = egoToScene([rx, ry, th], -0.12, 0.14);
  const right = egoToScene([rx, ry, th], -0.12, -0.14);
  ctx.fillStyle = COLOR_ROBOT;
  ctx.beginPath();
  const [tx, ty] = tf.toPx(tip[0], tip[1]);
  ctx.moveTo(tx, ty);
  for (const p of [left, right]) {
    const [px, py] = tf.toPx(p[0], p[1]);
    ctx.lineTo(px, py);
  }
  ctx.fill();

  // goal marker (goal arrives in ego frame)
  const [gx, gy] = egoToScene([rx, ry, th], scene.goal_ego[0], scene.goal_ego[1]);
  const [gpx, gpy] = tf.toPx(gx, gy);
  ctx.strokeStyle = COLOR_GOAL;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(gpx, gpy, 6, 0, 2 * Math.PI);
  ctx.stroke();
}

/**
 * Render a parsed annotation task. Preference phase draws exactly two
 * polylines with endpoint markers; a stop candidate is drawn as a stationary
 * labeled marker at the robot. Target phase draws the dataset trajectory
 * faintly plus a crosshair at the viewport center.
 */
export function renderTask(ctx: Ctx2D, view: Viewport, task: AnnotationTask): SceneView {
  const [xmin, ymin, xmax, ymax] = task.scene.bounds;
  const tf = CanvasTransform.fit({ xmin, ymin, xmax, ymax }, view);
  drawScene(ctx, tf, task.scene, view);
  const robot = task.scene.robot;

  if (task.phase === "preference" && task.pair !== null) {
    for (const cand of task.pair.candidates) {
      if (isStopCandidate(cand)) {
        const [px, py] = tf.toPx(robot[0], robot[1]);
        ctx.fillStyle = cand.color;
        ctx.beginPath();
        ctx.arc(px, py, 8, 0, 2 * Math.PI);
        ctx.fill();
        ctx.font = "12px sans-serif";
        ctx.textAlign = "center";
        ctx.fillText("stop", px, py - 12);
      } else {
        drawPolyline(ctx, tf, robot, cand.wps, cand.color, 3);
        drawEndpointMarker(ctx, tf, robot, cand.wps[cand.wps.length - 1]!, cand.color);
      }
    }
  } else {
    drawPolyline(ctx, tf, robot, task.scene.dataset_traj, COLOR_DATASET_FAINT, 2);
    // crosshair cursor hint at the viewport center
    ctx.strokeStyle = COLOR_ROBOT;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(view.width / 2 - 8, view.height / 2);
    ctx.lineTo(view.width / 2 + 8, view.height / 2);
    ctx.moveTo(view.width / 2, view.height / 2 - 8);
    ctx.lineTo(view.width / 2, view.height / 2 + 8);
    ctx.stroke();
  }
  return { transform: tf, task };
}

/** Visible error state for malformed payloads: never a silent blank canvas. */
export function renderError(ctx: Ctx2D, view: Viewport, message: string): void {
  ctx.fillStyle = COLOR_BACKGROUND;
  ctx.fillRect(0, 0, view.width, view.height);
  ctx.fillStyle = COLOR_ERROR;
  ctx.font = "14px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText("could not display this task", view.width / 2, view.height / 2 - 10);
  ctx.fillText(message, view.width / 2, view.height / 2 + 10);
}

/** Inverse of the render transform: pixel click to scene-frame meters. */
export function pickTarget(view: SceneView, px: number, py: number): [number, number] {
  return view.transform.toScene(px, py);
}
