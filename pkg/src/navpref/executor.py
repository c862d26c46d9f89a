"""Asynchronous plan-execute stack on a simulated clock.

Three logical nodes: a model runner that produces ego-frame waypoint paths at
its own cadence (with injectable inference latency), a path manager that
re-expresses the newest path in the odometry frame and publishes the next
valid target, and a planner that turns the target into velocity commands.
Messages are immutable; the path manager is the only holder of mutable path
state and swaps it atomically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .geometry import Pose2, Trajectory, from_frame, to_frame, wrap_angle
from .metrics import path_completion
from .sim import (
    LidarConfig,
    RobotLimits,
    RobotState,
    SensorFrame,
    World,
    cast_scan,
    check_static_collision,
    colliding_agent,
    step_robot,
)


class StalePathError(ValueError):
    """Message sequence number is not newer than the active path's."""


@dataclass(frozen=True)
class PathMsg:
    waypoints: Trajectory  # ego frame at planning time
    start_pose: Pose2      # odom pose when inference started
    stamp: float
    seq: int


@dataclass(frozen=True)
class VelocityCmd:
    v: float
    omega: float


@dataclass(frozen=True)
class PlannerGains:
    k_v: float = 1.2
    k_omega: float = 2.5


def model_runner_tick(
    policy: Callable[[SensorFrame], Trajectory],
    frame: SensorFrame,
    odom: Pose2,
    seq: int,
) -> Optional[PathMsg]:
    """One inference pass. A failing policy publishes nothing (never a stale copy)."""
    try:
        traj = policy(frame)
    except Exception:
        return None
    if traj is None:
        return None
    return PathMsg(waypoints=traj, start_pose=odom, stamp=frame.stamp, seq=seq)


class PathManager:
    """Holds the active path in the odometry frame and serves pruned targets."""

    def __init__(self):
        self._remaining: list[Pose2] = []
        self.source_seq: int = -1

    def accept_new_path(self, msg: PathMsg) -> None:
        if msg.seq <= self.source_seq:
            raise StalePathError(f"seq {msg.seq} <= active {self.source_seq}")
        # map every ego waypoint into odom using the pose recorded at planning
        # time, then swap in one assignment
        mapped = [from_frame(p, msg.start_pose) for p in msg.waypoints.waypoints]
        self._remaining = mapped
        self.source_seq = msg.seq

    def update(self, odom: Pose2, prune_radius: float) -> Optional[Pose2]:
        """Drop traversed/behind waypoints and return the current target."""
        if prune_radius <= 0:
            raise ValueError("prune_radius must be positive")
        remaining = self._remaining
        k = 0
        for k, wp in enumerate(remaining):
            local = to_frame(wp, odom)
            near = math.hypot(wp.x - odom.x, wp.y - odom.y) <= prune_radius
            behind = local.x < 0.0
            if not (near or behind):
                self._remaining = remaining[k:]
                return wp
        self._remaining = []
        return None

    @property
    def exhausted(self) -> bool:
        return not self._remaining


def planner_tick(
    target: Pose2,
    odom: Pose2,
    gains: PlannerGains = PlannerGains(),
    limits: RobotLimits = RobotLimits(),
    goal_tol: float = 0.05,
) -> VelocityCmd:
    """Track one waypoint: turn toward it, slow down when misaligned, never reverse."""
    dx, dy = target.x - odom.x, target.y - odom.y
    dist = math.hypot(dx, dy)
    if dist <= goal_tol:
        return VelocityCmd(0.0, 0.0)
    err = wrap_angle(math.atan2(dy, dx) - odom.theta)
    omega = float(np.clip(gains.k_omega * err, -limits.omega_max, limits.omega_max))
    v = float(np.clip(gains.k_v * dist, 0.0, limits.v_max)) * max(0.0, math.cos(err))
    return VelocityCmd(v, omega)


@dataclass
class EpisodeConfig:
    control_dt: float = 0.05
    runner_period: float = 0.5
    runner_latency: float = 0.0
    prune_radius: float = 0.25
    goal_tol: float = 0.2
    robot_radius: float = 0.3
    max_ticks: int = 1200
    gains: PlannerGains = field(default_factory=PlannerGains)
    limits: RobotLimits = field(default_factory=RobotLimits)
    lidar: LidarConfig = field(default_factory=LidarConfig)


@dataclass
class TickRow:
    t: float
    pose: Pose2
    cmd: VelocityCmd
    target: Optional[Pose2]
    collision: bool


@dataclass
class EpisodeLog:
    scenario: str
    rows: list[TickRow]
    success: bool
    collisions: int
    collided_terminated: bool
    executed_arclen: float
    planned_arclen: float

    @property
    def completion(self) -> float:
        return path_completion(
            self.executed_arclen, self.planned_arclen, self.success, self.collided_terminated
        )


def run_episode(
    world: World,
    policy: Callable[[SensorFrame], Trajectory],
    start: Pose2,
    goal: tuple[float, float],
    cfg: EpisodeConfig = EpisodeConfig(),
    scenario: str = "custom",
) -> EpisodeLog:
    """Simulated-clock episode: control loop at a fixed rate, model runner at
    its own period with optional latency, dynamic-agent collisions counted and
    the agent removed so the run continues, static collisions terminal.

    ``executed_arclen`` is progress toward the goal (initial minus final goal
    distance) against a straight-line plan, so completion reads as fraction of
    the intended route covered.
    """
    state = RobotState(pose=start)
    mgr = PathManager()
    rows: list[TickRow] = []
    seq = 0
    pending: Optional[tuple[float, PathMsg]] = None  # (available_at, msg)
    next_fire = 0.0
    collisions = 0
    collided_terminated = False
    success = False
    goal_dist0 = math.hypot(goal[0] - start.x, goal[1] - start.y)
    active_world = world

    for tick in range(cfg.max_ticks):
        t = tick * cfg.control_dt
        pose = state.pose

        # deliver a finished inference
        if pending is not None and t >= pending[0]:
            try:
                mgr.accept_new_path(pending[1])
            except StalePathError:
                pass
            pending = None

        # fire the runner when idle and due
        if pending is None and t >= next_fire:
            frame_scan = cast_scan(active_world, pose, cfg.lidar.n_beams, cfg.lidar.fov,
                                   cfg.lidar.max_range, t)
            g = to_frame(Pose2(goal[0], goal[1], 0.0), pose)
            frame = SensorFrame(f"{scenario}-ep-{tick:05d}", frame_scan, (g.x, g.y), t)
            msg = model_runner_tick(policy, frame, pose, seq)
            if msg is not None:
                seq += 1
                pending = (t + cfg.runner_latency, msg)
            next_fire = t + cfg.runner_period

        target = mgr.update(pose, cfg.prune_radius)
        if target is not None:
            cmd = planner_tick(target, pose, cfg.gains, cfg.limits)
        else:
            cmd = VelocityCmd(0.0, 0.0)
        state = step_robot(state, (cmd.v, cmd.omega), cfg.control_dt, cfg.limits)

        collided = False
        agent_idx = colliding_agent(active_world, state.pose, cfg.robot_radius, t + cfg.control_dt)
        if agent_idx is not None:
            # counted as a collision; the agent is removed and the run continues
            collisions += 1
            collided = True
            active_world = active_world.without_agent(agent_idx)
        if check_static_collision(active_world, state.pose, cfg.robot_radius):
            collisions += 1
            collided = True
            collided_terminated = True
        rows.append(TickRow(t, state.pose, cmd, target, collided))
        if collided_terminated:
            break
        if math.hypot(goal[0] - state.pose.x, goal[1] - state.pose.y) <= cfg.goal_tol:
            success = True
            break

    final_dist = math.hypot(goal[0] - state.pose.x, goal[1] - state.pose.y)
    executed = max(0.0, goal_dist0 - final_dist)
    return EpisodeLog(
        scenario=scenario,
        rows=rows,
        success=success,
        collisions=collisions,
        collided_terminated=collided_terminated,
        executed_arclen=executed,
        planned_arclen=goal_dist0,
    )
