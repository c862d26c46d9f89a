"""Offline and episode-level safety metrics over trajectories and obstacle geometry."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Trajectory

DEFAULT_INTERP_STEP = 0.05
DEFAULT_ROBOT_WIDTH = 0.5
DEFAULT_CLEARANCE_SENTINEL = 10.0
HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class LaserScan:
    angle_min: float
    angle_increment: float
    ranges: tuple[float, ...]
    max_range: float

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple(float(r) for r in self.ranges))
        for r in self.ranges:
            if not (0.0 < r <= self.max_range):
                raise ValueError("ranges must lie in (0, max_range]")


@dataclass(frozen=True)
class ObstacleCloud:
    points: np.ndarray  # (K, 2), robot frame

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("obstacle points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class MetricsConfig:
    interp_step: float = DEFAULT_INTERP_STEP
    robot_width: float = DEFAULT_ROBOT_WIDTH
    clearance_sentinel: float = DEFAULT_CLEARANCE_SENTINEL


@dataclass
class MetricsReport:
    near_collision_count: int
    mean_deviation: float
    mean_min_clearance: float
    per_sample: list[dict] = field(default_factory=list)
    success_rate: float = 0.0
    mean_collisions: float = 0.0
    mean_path_completion: float = 0.0

    def summary(self) -> dict:
        return {
            "near_collision_count": self.near_collision_count,
            "mean_deviation": self.mean_deviation,
            "mean_min_clearance": self.mean_min_clearance,
            "success_rate": self.success_rate,
            "mean_collisions": self.mean_collisions,
            "mean_path_completion": self.mean_path_completion,
            "n_samples": len(self.per_sample),
        }


def scan_to_points(scan: LaserScan) -> ObstacleCloud:
    """Polar returns to Cartesian points; beams at max_range carry no return."""
    angles = scan.angle_min + scan.angle_increment * np.arange(len(scan.ranges))
    ranges = np.asarray(scan.ranges)
    hit = ranges < scan.max_range
    pts = np.stack([ranges[hit] * np.cos(angles[hit]), ranges[hit] * np.sin(angles[hit])], axis=1)
    return ObstacleCloud(pts)


def densify_polyline(positions: np.ndarray, step: float) -> np.ndarray:
    """Insert points along each segment so consecutive samples are <= step apart."""
    if step <= 0:
        raise ValueError("step must be positive")
    out = [positions[0]]
    for a, b in zip(positions[:-1], positions[1:]):
        seg = np.linalg.norm(b - a)
        n = max(1, int(np.ceil(seg / step)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    return np.asarray(out)


def min_clearance(
    traj: Trajectory,
    cloud: ObstacleCloud,
    interp_step: float = DEFAULT_INTERP_STEP,
    sentinel: float = DEFAULT_CLEARANCE_SENTINEL,
) -> float:
    """Minimum distance from the densified trajectory to any obstacle point."""
    if len(cloud) == 0:
        return sentinel
    dense = densify_polyline(traj.positions(), interp_step)
    d2 = np.sum((dense[:, None, :] - cloud.points[None, :, :]) ** 2, axis=2)
    return float(np.sqrt(d2.min()))


def is_near_collision(
    traj: Trajectory,
    cloud: ObstacleCloud,
    robot_width: float = DEFAULT_ROBOT_WIDTH,
    interp_step: float = DEFAULT_INTERP_STEP,
    sentinel: float = DEFAULT_CLEARANCE_SENTINEL,
) -> bool:
    """True when clearance drops strictly below the robot width."""
    if robot_width <= 0:
        raise ValueError("robot_width must be positive")
    return min_clearance(traj, cloud, interp_step, sentinel) < robot_width


def deviation(pred: Trajectory, preferred: Trajectory) -> float:
    """Mean index-aligned waypoint position distance; headings ignored."""
    if len(pred) != len(preferred):
        raise ValueError("trajectories must have equal length")
    d = np.linalg.norm(pred.positions() - preferred.positions(), axis=1)
    return float(d.mean())


def path_completion(
    executed_arclen: float,
    planned_arclen: float,
    reached_goal: bool,
    collided_terminated: bool,
) -> float:
    """Fraction of the planned path completed; collided early stops stay under 1."""
    if executed_arclen < 0 or planned_arclen < 0:
        raise ValueError("arc lengths must be non-negative")
    if reached_goal:
        return 1.0
    if planned_arclen == 0.0:
        return 0.0
    cap = 0.999 if collided_terminated else 1.0
    return min(executed_arclen / planned_arclen, cap)


def evaluate_batch(
    samples: Sequence[tuple[Trajectory, Trajectory, ObstacleCloud]],
    cfg: Optional[MetricsConfig] = None,
) -> MetricsReport:
    """Aggregate offline metrics over (predicted, preferred, obstacles) samples."""
    if not samples:
        raise ValueError("need at least one sample")
    cfg = cfg or MetricsConfig()
    rows = []
    for idx, (pred, preferred, cloud) in enumerate(samples):
        clear = min_clearance(pred, cloud, cfg.interp_step, cfg.clearance_sentinel)
        rows.append(
            {
                "sample": idx,
                "deviation": deviation(pred, preferred),
                "min_clearance": clear,
                "near_collision": clear < cfg.robot_width,
            }
        )
    return MetricsReport(
        near_collision_count=sum(r["near_collision"] for r in rows),
        mean_deviation=float(np.mean([r["deviation"] for r in rows])),
        mean_min_clearance=float(np.mean([r["min_clearance"] for r in rows])),
        per_sample=rows,
    )


def histogram(values: Sequence[float], bins: int = HISTOGRAM_BINS) -> dict:
    """Uniform-bin histogram over the observed range, for distribution reports."""
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist()}
