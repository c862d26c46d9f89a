import { AnnotationTask, Scene } from "../src/schema.js";

export function makeScene(overrides: Partial<Scene> = {}): Scene {
  return {
    segments: [
      [
        [-0.5, 2.4],
        [9.8, 2.4],
      ],
    ],
    circles: [[[4.0, 6.1], 0.25]],
    agents: [{ pos: [6.0, 2.0], radius: 0.3 }],
    robot: [1.0, 5.0, 0.0],
    goal_ego: [8.0, 0.0],
    bounds: [-0.5, -1.0, 12.5, 10.0],
    dataset_traj: [
      [0.3, 0.0, 0.0],
      [0.6, 0.05, 0.1],
      [0.9, 0.12, 0.1],
      [1.2, 0.2, 0.1],
      [1.5, 0.3, 0.1],
      [1.8, 0.42, 0.1],
      [2.1, 0.55, 0.1],
      [2.4, 0.7, 0.1],
    ],
    ...overrides,
  };
}

export function makeTargetTask(overrides: Partial<AnnotationTask> = {}): AnnotationTask {
  return {
    task_id: "target-e000-000",
    observation_id: "e000-000",
    phase: "target",
    scene: makeScene(),
    pair: null,
    ...overrides,
  } as AnnotationTask;
}

export function makePrefTask(
  firstIndex = 0,
  secondIndex = 2,
  overrides: Partial<AnnotationTask> = {},
): AnnotationTask {
  const kinds = ["dataset", "rotated_ccw", "rotated_cw", "human_target"] as const;
  return {
    task_id: `pref-e000-000-${Math.min(firstIndex, secondIndex)}-${Math.max(firstIndex, secondIndex)}`,
    observation_id: "e000-000",
    phase: "preference",
    scene: makeScene(),
    pair: {
      candidates: [
        {
          index: firstIndex,
          kind: kinds[firstIndex % kinds.length]!,
          wps: makeScene().dataset_traj,
          color: "#4878cf",
        },
        {
          index: secondIndex,
          kind: kinds[secondIndex % kinds.length]!,
          wps: makeScene().dataset_traj.map(([x, y, t]) => [x, -y, -t] as [number, number, number]),
          color: "#e07b39",
        },
      ],
    },
    ...overrides,
  } as AnnotationTask;
}

export function makeStopPrefTask(): AnnotationTask {
  const task = makePrefTask(0, 3);
  task.pair!.candidates[1] = {
    index: 3,
    kind: "stop",
    wps: [[0.0, 0.0, 0.0]],
    color: "#8e63b5",
  };
  return task;
}
