"""Planar pose and trajectory primitives.

Poses are (x, y, theta) in meters/radians. Trajectories are fixed-length
waypoint sequences tagged with the frame they live in; everything downstream
(candidate generation, metrics, the executor) trades in these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

EGO_START = "ego_start"
ODOM = "odom"

_DEGENERATE_EPS = 1e-9
SCALE_MIN = 0.1
SCALE_MAX = 10.0


class DegeneratePathError(ValueError):
    """Source path has no usable direction (endpoint at the origin)."""


class DegenerateTargetError(ValueError):
    """Requested target sits at the ego origin; use a stop candidate instead."""


class ScaleOutOfRangeError(ValueError):
    """Similarity scale needed to reach the target is outside [0.1, 10]."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]; -pi maps to +pi."""
    return math.pi - ((math.pi - theta) % (2.0 * math.pi))


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Transform2:
    """Rigid 2D transform: rotate by ``rotation`` then translate."""

    translation: tuple[float, float]
    rotation: float

    def apply(self, pose: Pose2) -> Pose2:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        tx, ty = self.translation
        return Pose2(
            c * pose.x - s * pose.y + tx,
            s * pose.x + c * pose.y + ty,
            pose.theta + self.rotation,
        )

    def apply_point(self, x: float, y: float) -> tuple[float, float]:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        tx, ty = self.translation
        return (c * x - s * y + tx, s * x + c * y + ty)

    def compose(self, other: "Transform2") -> "Transform2":
        tx, ty = self.apply_point(*other.translation)
        return Transform2((tx, ty), wrap_angle(self.rotation + other.rotation))

    def inverse(self) -> "Transform2":
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        tx, ty = self.translation
        return Transform2((-c * tx - s * ty, s * tx - c * ty), -self.rotation)

    @staticmethod
    def from_pose(pose: Pose2) -> "Transform2":
        return Transform2((pose.x, pose.y), pose.theta)


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[Pose2, ...]
    frame_tag: str = EGO_START

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        for p in self.waypoints:
            if not (math.isfinite(p.x) and math.isfinite(p.y) and math.isfinite(p.theta)):
                raise ValueError("trajectory waypoints must be finite")

    def __len__(self) -> int:
        return len(self.waypoints)

    def positions(self) -> np.ndarray:
        """(N, 2) array of waypoint positions."""
        return np.array([[p.x, p.y] for p in self.waypoints])

    def as_array(self) -> np.ndarray:
        """(N, 3) array of (x, y, theta) rows."""
        return np.array([[p.x, p.y, p.theta] for p in self.waypoints])

    @staticmethod
    def from_array(arr: Iterable[Sequence[float]], frame_tag: str = EGO_START) -> "Trajectory":
        return Trajectory(tuple(Pose2(float(r[0]), float(r[1]), float(r[2])) for r in arr), frame_tag)

    def arc_length(self) -> float:
        pos = self.positions()
        return float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))


def heading_from_positions(positions: Sequence[Sequence[float]]) -> list[float]:
    """Segment headings: theta_i points from p_i to p_{i+1}.

    The final heading copies the previous one. Segments shorter than 1e-9
    inherit the prior heading (the first such defaults to 0), so a stop path
    gets all-zero headings.
    """
    if len(positions) < 2:
        raise ValueError("need at least 2 positions")
    headings: list[float] = []
    prev = 0.0
    for a, b in zip(positions[:-1], positions[1:]):
        dx, dy = b[0] - a[0], b[1] - a[1]
        if math.hypot(dx, dy) < _DEGENERATE_EPS:
            headings.append(prev)
        else:
            prev = math.atan2(dy, dx)
            headings.append(prev)
    headings.append(headings[-1])
    return headings


def rotate_trajectory(traj: Trajectory, angle: float) -> Trajectory:
    """Rotate a trajectory rigidly about the ego origin.

    Shape-preserving: positions rotate, headings shift by the same angle.
    """
    if not math.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    if traj.frame_tag != EGO_START:
        raise ValueError("rotation is defined in the ego start frame")
    c, s = math.cos(angle), math.sin(angle)
    wps = tuple(
        Pose2(c * p.x - s * p.y, s * p.x + c * p.y, p.theta + angle) for p in traj.waypoints
    )
    return Trajectory(wps, traj.frame_tag)


def resample_arclength(traj: Trajectory, n: int) -> Trajectory:
    """Resample a polyline to n waypoints at equal arc-length spacing.

    Headings are recomputed from consecutive positions. A near-zero-length
    input collapses to n copies of its start pose (a stop-like path).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if len(traj) < 2:
        raise ValueError("need at least 2 waypoints")
    pos = traj.positions()
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total < _DEGENERATE_EPS:
        start = traj.waypoints[0]
        return Trajectory((start,) * n, traj.frame_tag)
    targets = np.linspace(0.0, total, n)
    xs = np.interp(targets, cum, pos[:, 0])
    ys = np.interp(targets, cum, pos[:, 1])
    # pin endpoints exactly
    xs[0], ys[0] = pos[0]
    xs[-1], ys[-1] = pos[-1]
    new_pos = list(zip(xs, ys))
    headings = heading_from_positions(new_pos)
    return Trajectory(
        tuple(Pose2(x, y, h) for (x, y), h in zip(new_pos, headings)), traj.frame_tag
    )


def reparameterize_to_target(traj: Trajectory, target: tuple[float, float], n: int) -> Trajectory:
    """Map a path onto a clicked target by a similarity transform about the origin.

    The unique rotation + uniform positive scale taking the original final
    waypoint to ``target`` is applied to every position, then the result is
    resampled by arc length to n waypoints with headings derived from
    consecutive positions.
    """
    if len(traj) < 2:
        raise ValueError("need at least 2 waypoints")
    end = traj.waypoints[-1]
    end_norm = math.hypot(end.x, end.y)
    if end_norm < _DEGENERATE_EPS:
        raise DegeneratePathError("source path ends at the origin")
    tgt_norm = math.hypot(target[0], target[1])
    if tgt_norm < _DEGENERATE_EPS:
        raise DegenerateTargetError("target at the ego origin; use stop")
    scale = tgt_norm / end_norm
    if not (SCALE_MIN <= scale <= SCALE_MAX):
        raise ScaleOutOfRangeError(f"required scale {scale:.3g} outside [{SCALE_MIN}, {SCALE_MAX}]")
    rot = math.atan2(target[1], target[0]) - math.atan2(end.y, end.x)
    c, s = math.cos(rot), math.sin(rot)
    pos = traj.positions()
    mapped = np.empty_like(pos)
    mapped[:, 0] = scale * (c * pos[:, 0] - s * pos[:, 1])
    mapped[:, 1] = scale * (s * pos[:, 0] + c * pos[:, 1])
    headings = heading_from_positions(mapped)
    shaped = Trajectory(
        tuple(Pose2(x, y, h) for (x, y), h in zip(mapped, headings)), traj.frame_tag
    )
    out = resample_arclength(shaped, n)
    # resampling pins the final position, which the similarity sends to target
    return out


def from_frame(pose_in_frame: Pose2, frame_origin: Pose2) -> Pose2:
    """Express a pose given in ``frame_origin``'s frame in the parent frame."""
    return Transform2.from_pose(frame_origin).apply(pose_in_frame)


def to_frame(pose_in_parent: Pose2, frame_origin: Pose2) -> Pose2:
    """Express a parent-frame pose in ``frame_origin``'s frame."""
    return Transform2.from_pose(frame_origin).inverse().apply(pose_in_parent)


def trajectory_to_frame(traj: Trajectory, frame_origin: Pose2, frame_tag: str) -> Trajectory:
    return Trajectory(tuple(to_frame(p, frame_origin) for p in traj.waypoints), frame_tag)


def trajectory_from_frame(traj: Trajectory, frame_origin: Pose2, frame_tag: str) -> Trajectory:
    return Trajectory(tuple(from_frame(p, frame_origin) for p in traj.waypoints), frame_tag)
