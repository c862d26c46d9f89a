"""2D navigation world: geometry, simulated lidar, scenarios, a noisy
teleoperation surrogate for dataset generation, and the synthetic preference
oracle.

The world is static segments + static discs + disc-shaped dynamic agents that
traverse closed waypoint loops at constant speed. Everything is deterministic
given time and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .candidates import STOP, CandidateSet
from .geometry import EGO_START, Pose2, Trajectory, to_frame, wrap_angle
from .metrics import LaserScan, ObstacleCloud, densify_polyline, min_clearance, scan_to_points

OPEN_SPACE = "open_space"
GLASS_CORRIDOR = "glass_corridor"
NARROW_PASSAGE = "narrow_passage"
SCENARIOS = (OPEN_SPACE, GLASS_CORRIDOR, NARROW_PASSAGE)

_EPS = 1e-12


@dataclass(frozen=True)
class DynamicAgent:
    waypoints: tuple[tuple[float, float], ...]
    speed: float
    radius: float
    phase: float = 0.0

    def _loop(self) -> np.ndarray:
        pts = np.asarray(self.waypoints, dtype=float)
        if not np.allclose(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[0]])
        return pts

    def position(self, t: float) -> np.ndarray:
        pts = self._loop()
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        total = seg.sum()
        if total < _EPS or self.speed == 0.0:
            return pts[0].copy()
        d = (self.speed * (t + self.phase)) % total
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        k = int(np.searchsorted(cum, d, side="right")) - 1
        k = min(k, len(seg) - 1)
        frac = (d - cum[k]) / seg[k]
        return pts[k] + frac * (pts[k + 1] - pts[k])


@dataclass(frozen=True)
class World:
    static_segments: tuple[tuple[tuple[float, float], tuple[float, float]], ...] = ()
    static_circles: tuple[tuple[tuple[float, float], float], ...] = ()
    agents: tuple[DynamicAgent, ...] = ()
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if xmax <= xmin or ymax <= ymin:
            raise ValueError("bounds must be non-degenerate")
        for _, r in self.static_circles:
            if r <= 0:
                raise ValueError("circle radii must be positive")

    def without_agent(self, idx: int) -> "World":
        agents = tuple(a for k, a in enumerate(self.agents) if k != idx)
        return replace(self, agents=agents)


@dataclass(frozen=True)
class RobotLimits:
    v_max: float = 1.0
    omega_max: float = 2.0


@dataclass(frozen=True)
class RobotState:
    pose: Pose2
    v: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class SensorFrame:
    observation_id: str
    scan: LaserScan
    goal: tuple[float, float]  # relative to the robot, ego frame
    stamp: float


@dataclass(frozen=True)
class LidarConfig:
    n_beams: int = 64
    fov: float = math.radians(270.0)
    max_range: float = 10.0


def step_robot(state: RobotState, cmd: tuple[float, float], dt: float,
               limits: RobotLimits = RobotLimits()) -> RobotState:
    """Unicycle integration with command clamping."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = float(np.clip(cmd[0], -limits.v_max, limits.v_max))
    omega = float(np.clip(cmd[1], -limits.omega_max, limits.omega_max))
    p = state.pose
    return RobotState(
        pose=Pose2(p.x + v * math.cos(p.theta) * dt,
                   p.y + v * math.sin(p.theta) * dt,
                   p.theta + omega * dt),
        v=v,
        omega=omega,
    )


def _segment_arrays(world: World) -> tuple[np.ndarray, np.ndarray]:
    if not world.static_segments:
        return np.zeros((0, 2)), np.zeros((0, 2))
    a = np.asarray([s[0] for s in world.static_segments], dtype=float)
    b = np.asarray([s[1] for s in world.static_segments], dtype=float)
    return a, b


def _circle_arrays(world: World, t: float) -> tuple[np.ndarray, np.ndarray]:
    centers = [c for c, _ in world.static_circles]
    radii = [r for _, r in world.static_circles]
    for ag in world.agents:
        centers.append(ag.position(t))
        radii.append(ag.radius)
    if not centers:
        return np.zeros((0, 2)), np.zeros(0)
    return np.asarray(centers, dtype=float), np.asarray(radii, dtype=float)


def cast_scan(world: World, pose: Pose2, n_beams: int, fov: float,
              max_range: float, t: float) -> LaserScan:
    """Raycast against walls and discs; beams with no hit read max_range."""
    if n_beams < 1:
        raise ValueError("need at least one beam")
    if not (0.0 < fov <= 2.0 * math.pi):
        raise ValueError("fov must be in (0, 2*pi]")
    if n_beams == 1:
        angle_min, inc = 0.0, 0.0
        local = np.array([0.0])
    else:
        angle_min = -fov / 2.0
        inc = fov / (n_beams - 1)
        local = angle_min + inc * np.arange(n_beams)
    ang = pose.theta + local
    d = np.stack([np.cos(ang), np.sin(ang)], axis=1)  # (B, 2)
    o = np.array([pose.x, pose.y])
    best = np.full(n_beams, max_range)

    a, b = _segment_arrays(world)
    if len(a):
        e = b - a  # (S, 2)
        ao = a - o  # (S, 2)
        denom = d[:, 0, None] * e[None, :, 1] - d[:, 1, None] * e[None, :, 0]  # (B, S)
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = (ao[None, :, 0] * e[None, :, 1] - ao[None, :, 1] * e[None, :, 0]) / denom
            ss = (ao[None, :, 0] * d[:, 1, None] - ao[None, :, 1] * d[:, 0, None]) / denom
        valid = (np.abs(denom) > _EPS) & (tt > 1e-9) & (ss >= 0.0) & (ss <= 1.0)
        tt = np.where(valid, tt, np.inf)
        best = np.minimum(best, tt.min(axis=1, initial=np.inf))

    centers, radii = _circle_arrays(world, t)
    if len(centers):
        m = centers - o  # (C, 2)
        proj = d @ m.T  # (B, C)
        m2 = np.sum(m * m, axis=1)  # (C,)
        disc = proj**2 - (m2[None, :] - radii[None, :] ** 2)
        with np.errstate(invalid="ignore"):
            root = np.sqrt(np.where(disc >= 0, disc, np.nan))
        t1 = proj - root
        t2 = proj + root
        t1 = np.where(t1 > 1e-9, t1, np.inf)
        t2 = np.where(t2 > 1e-9, t2, np.inf)
        hit = np.where(np.isnan(root), np.inf, np.minimum(t1, t2))
        best = np.minimum(best, hit.min(axis=1, initial=np.inf))

    best = np.clip(best, 1e-6, max_range)
    return LaserScan(angle_min, inc, tuple(best.tolist()), max_range)


def _point_segment_dist(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from one point to many segments."""
    e = b - a
    ln2 = np.sum(e * e, axis=1)
    tt = np.clip(np.sum((p - a) * e, axis=1) / np.where(ln2 < _EPS, 1.0, ln2), 0.0, 1.0)
    closest = a + tt[:, None] * e
    return np.linalg.norm(p - closest, axis=1)


def check_collision(world: World, pose: Pose2, robot_radius: float, t: float) -> bool:
    """True iff the robot disc strictly overlaps any wall, pillar, or agent."""
    if robot_radius <= 0:
        raise ValueError("robot_radius must be positive")
    p = np.array([pose.x, pose.y])
    a, b = _segment_arrays(world)
    if len(a) and np.any(_point_segment_dist(p, a, b) < robot_radius):
        return True
    centers, radii = _circle_arrays(world, t)
    if len(centers):
        d = np.linalg.norm(centers - p, axis=1)
        if np.any(d < robot_radius + radii):
            return True
    return False


def check_static_collision(world: World, pose: Pose2, robot_radius: float) -> bool:
    return check_collision(replace(world, agents=()), pose, robot_radius, 0.0)


def colliding_agent(world: World, pose: Pose2, robot_radius: float, t: float) -> Optional[int]:
    """Index of the first agent overlapping the robot disc, if any."""
    p = np.array([pose.x, pose.y])
    for k, ag in enumerate(world.agents):
        if np.linalg.norm(ag.position(t) - p) < robot_radius + ag.radius:
            return k
    return None


def _box_walls(xmin, ymin, xmax, ymax):
    return (
        ((xmin, ymin), (xmax, ymin)),
        ((xmax, ymin), (xmax, ymax)),
        ((xmax, ymax), (xmin, ymax)),
        ((xmin, ymax), (xmin, ymin)),
    )


def build_scenario(scenario_id: str, passage_width: float = 1.2
                   ) -> tuple[World, Pose2, tuple[float, float]]:
    """Deterministic benchmark worlds with start pose and goal point."""
    if scenario_id == OPEN_SPACE:
        # open room with a pair of structural columns, goal straight ahead,
        # one person near the goal walking toward the start on a slight
        # diagonal
        world = World(
            static_segments=_box_walls(0.0, 0.0, 12.0, 10.0),
            static_circles=(((4.0, 6.1), 0.25), ((7.0, 6.4), 0.25)),
            agents=(DynamicAgent(((6.0, 2.0), (6.0, 9.0)), speed=0.9, radius=0.3, phase=2.0),),
            bounds=(0.0, 0.0, 12.0, 10.0),
        )
        return world, Pose2(1.0, 5.0, 0.0), (9.0, 5.0)
    if scenario_id == GLASS_CORRIDOR:
        # full-length wall on one side, pillar row on the other, two agents
        # approaching from either lateral side of the passage
        pillars = tuple(((1.5 + 0.7 * k, 0.0), 0.25) for k in range(12))
        world = World(
            static_segments=(((-0.5, 2.4), (9.8, 2.4)),),
            static_circles=pillars,
            agents=(
                DynamicAgent(((10.0, 1.8), (1.5, 1.8)), speed=0.5, radius=0.3, phase=0.0),
                DynamicAgent(((8.0, 0.7), (1.5, 0.7)), speed=0.5, radius=0.3, phase=3.0),
            ),
            bounds=(-0.5, -1.0, 12.5, 3.5),
        )
        return world, Pose2(0.5, 1.2, 0.0), (11.0, 1.2)
    if scenario_id == NARROW_PASSAGE:
        # desk rows leave a centered passage; two agents emerge sequentially
        # from opposite sides
        half = passage_width / 2.0
        world = World(
            static_segments=(
                ((2.0, half), (8.0, half)),
                ((2.0, -half), (8.0, -half)),
            ),
            agents=(
                DynamicAgent(((7.5, 0.25), (2.5, 0.25)), speed=0.5, radius=0.22, phase=0.0),
                DynamicAgent(((7.5, -0.25), (2.5, -0.25)), speed=0.5, radius=0.22, phase=8.0),
            ),
            bounds=(-0.5, -3.0, 10.5, 3.0),
        )
        return world, Pose2(0.5, 0.0, 0.0), (9.5, 0.0)
    raise ValueError(f"unknown scenario {scenario_id!r}")


@dataclass(frozen=True)
class NoiseConfig:
    sigma_v: float = 0.0
    sigma_omega: float = 0.0
    lag_ticks: int = 0
    # per-episode constant steering bias drawn from N(bias_mean, bias_omega);
    # unlike white noise it does not average out over a waypoint interval. A
    # nonzero mean models a habitually one-sided operator
    bias_omega: float = 0.0
    bias_mean: float = 0.0


@dataclass(frozen=True)
class TeleopConfig:
    control_dt: float = 0.05
    v_max: float = 1.0
    omega_max: float = 2.0
    k_v: float = 1.0
    k_omega: float = 2.0
    k_rep: float = 0.25
    influence_dist: float = 1.5
    goal_tol: float = 0.2
    max_ticks: int = 800
    sample_stride: int = 8   # ticks between recorded observations
    wp_stride: int = 8       # ticks between recorded waypoints
    horizon: int = 8         # waypoints per executed trajectory
    lidar: LidarConfig = field(default_factory=LidarConfig)


@dataclass(frozen=True)
class ObservationSample:
    frame: SensorFrame
    executed: Trajectory  # ego frame of the pose at the sample instant
    pose: Pose2           # odom pose at the sample instant
    scenario: str


@dataclass
class TeleopResult:
    samples: list[ObservationSample]
    poses: list[Pose2]
    reached_goal: bool
    truncated: bool


def _steer(pose: Pose2, goal: tuple[float, float], scan: LaserScan,
           cfg: TeleopConfig) -> tuple[float, float]:
    """Goal attraction plus obstacle repulsion, expressed in the ego frame."""
    g = to_frame(Pose2(goal[0], goal[1], 0.0), pose)
    dist = math.hypot(g.x, g.y)
    if dist < _EPS:
        return 0.0, 0.0
    vec = np.array([g.x, g.y]) / dist
    cloud = scan_to_points(scan)
    for px, py in cloud.points:
        r = math.hypot(px, py)
        if 1e-6 < r < cfg.influence_dist:
            w = cfg.k_rep * (1.0 / r - 1.0 / cfg.influence_dist) / (r * r)
            vec -= w * np.array([px, py]) / r
    err = math.atan2(vec[1], vec[0])
    omega = float(np.clip(cfg.k_omega * err, -cfg.omega_max, cfg.omega_max))
    v = float(np.clip(cfg.k_v * dist, 0.0, cfg.v_max)) * max(0.0, math.cos(err))
    return v, omega


def teleop_surrogate(
    world: World,
    start: Pose2,
    goal: tuple[float, float],
    noise: NoiseConfig,
    rng: np.random.Generator,
    cfg: TeleopConfig = TeleopConfig(),
    scenario: str = "custom",
    obs_prefix: str = "",
) -> TeleopResult:
    """Drive a reactive controller to the goal, with actuation noise and a
    fixed command lag, recording sensor frames and executed trajectories.

    The recorded trajectories are what the robot actually did over the next
    horizon, so noise and lag leave their mark on the dataset: the imperfect
    demonstrations the preference pipeline is meant to improve on.
    """
    state = RobotState(pose=start)
    limits = RobotLimits(cfg.v_max, cfg.omega_max)
    lag_queue: list[tuple[float, float]] = [(0.0, 0.0)] * noise.lag_ticks
    if noise.bias_omega > 0:
        omega_bias = float(rng.normal(noise.bias_mean, noise.bias_omega))
    else:
        omega_bias = noise.bias_mean
    poses = [start]
    scans: dict[int, LaserScan] = {}
    reached = False
    lidar = cfg.lidar
    for tick in range(cfg.max_ticks):
        t = tick * cfg.control_dt
        pose = state.pose
        if math.hypot(goal[0] - pose.x, goal[1] - pose.y) <= cfg.goal_tol:
            reached = True
            break
        scan = cast_scan(world, pose, lidar.n_beams, lidar.fov, lidar.max_range, t)
        if tick % cfg.sample_stride == 0:
            scans[tick] = scan
        v, omega = _steer(pose, goal, scan, cfg)
        v += float(rng.normal(0.0, noise.sigma_v)) if noise.sigma_v > 0 else 0.0
        omega += float(rng.normal(0.0, noise.sigma_omega)) if noise.sigma_omega > 0 else 0.0
        omega += omega_bias
        if noise.lag_ticks > 0:
            lag_queue.append((v, omega))
            v, omega = lag_queue.pop(0)
        state = step_robot(state, (v, omega), cfg.control_dt, limits)
        poses.append(state.pose)

    samples: list[ObservationSample] = []
    last = len(poses) - 1
    for tick, scan in sorted(scans.items()):
        if tick + cfg.horizon * cfg.wp_stride > last:
            continue
        base = poses[tick]
        wps = []
        for k in range(1, cfg.horizon + 1):
            p = poses[tick + k * cfg.wp_stride]
            wps.append(to_frame(p, base))
        g = to_frame(Pose2(goal[0], goal[1], 0.0), base)
        obs_id = f"{obs_prefix}{scenario}-{tick:05d}"
        frame = SensorFrame(obs_id, scan, (g.x, g.y), tick * cfg.control_dt)
        samples.append(ObservationSample(frame, Trajectory(tuple(wps), EGO_START), base, scenario))
    return TeleopResult(samples=samples, poses=poses,
                        reached_goal=reached, truncated=not reached)


@dataclass(frozen=True)
class OracleConfig:
    lam: float = 0.5
    robot_radius: float = 0.3
    interp_step: float = 0.05
    sentinel: float = 10.0


def oracle_scores(cs: CandidateSet, cloud: ObstacleCloud, goal_ego: tuple[float, float],
                  cfg: OracleConfig = OracleConfig()) -> list[float]:
    """Clearance-and-progress score per candidate; colliding candidates get -inf.

    A stop candidate scores the current standoff distance with zero progress,
    and never hard-fails, so it comes out on top exactly when every moving
    candidate collides.
    """
    goal = np.asarray(goal_ego, dtype=float)
    goal_dist = float(np.linalg.norm(goal))
    standoff = (
        float(np.min(np.linalg.norm(cloud.points, axis=1))) if len(cloud) else cfg.sentinel
    )
    scores = []
    for kind, traj in cs.candidates:
        if kind == STOP or traj.arc_length() < 1e-9:
            scores.append(standoff)
            continue
        clear = min_clearance(traj, cloud, cfg.interp_step, cfg.sentinel)
        if clear < cfg.robot_radius:
            scores.append(-math.inf)
            continue
        end = traj.positions()[-1]
        progress = goal_dist - float(np.linalg.norm(end - goal))
        scores.append(clear + cfg.lam * progress)
    return scores


def oracle_prefer_scored(scores: Sequence[float], i: int, j: int) -> int:
    """y = 1 iff candidate i scores strictly higher; exact ties go to the lower index."""
    if scores[i] > scores[j]:
        return 1
    if scores[i] < scores[j]:
        return 0
    return 1 if i < j else 0


def oracle_prefer(cs: CandidateSet, i: int, j: int, world: World, robot_pose: Pose2,
                  goal: tuple[float, float], t: float,
                  cfg: OracleConfig = OracleConfig(),
                  lidar: LidarConfig = LidarConfig()) -> int:
    """World-based oracle: casts a scan at the robot pose and scores the pair."""
    scan = cast_scan(world, robot_pose, lidar.n_beams, lidar.fov, lidar.max_range, t)
    cloud = scan_to_points(scan)
    g = to_frame(Pose2(goal[0], goal[1], 0.0), robot_pose)
    scores = oracle_scores(cs, cloud, (g.x, g.y), cfg)
    return oracle_prefer_scored(scores, i, j)
