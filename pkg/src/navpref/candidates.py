"""Per-observation counterfactual candidate sets.

Each observation gets M candidate trajectories: the dataset trajectory,
a counterclockwise/clockwise rotation pair sampled uniformly from a
configured magnitude range, and a final slot that is either an
annotator-guided target path, a stop path, or an extra rotation when no
annotator input exists.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    EGO_START,
    Pose2,
    Trajectory,
    reparameterize_to_target,
    rotate_trajectory,
)

DATASET = "dataset"
ROTATED_CCW = "rotated_ccw"
ROTATED_CW = "rotated_cw"
HUMAN_TARGET = "human_target"
STOP = "stop"

CANDIDATE_KINDS = (DATASET, ROTATED_CCW, ROTATED_CW, HUMAN_TARGET, STOP)

# kinds that count as annotator-suggested for tie-breaking
ANNOTATOR_KINDS = (HUMAN_TARGET, STOP)


@dataclass(frozen=True)
class GenConfig:
    m: int = 4
    n: int = 8
    rot_min: float = math.radians(15.0)
    rot_max: float = math.radians(45.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if not (0.0 < self.rot_min < self.rot_max < math.pi):
            raise ValueError("need 0 < rot_min < rot_max < pi")


@dataclass(frozen=True)
class CandidateSet:
    observation_id: str
    candidates: tuple[tuple[str, Trajectory], ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        kinds = [k for k, _ in self.candidates]
        if kinds.count(DATASET) != 1 or kinds[0] != DATASET:
            raise ValueError("candidate 0 must be the single dataset trajectory")
        n = len(self.candidates[0][1])
        for k, t in self.candidates:
            if t.frame_tag != EGO_START or len(t) != n:
                raise ValueError("candidates must share frame ego_start and length")

    def __len__(self) -> int:
        return len(self.candidates)

    def kind(self, idx: int) -> str:
        return self.candidates[idx][0]

    def trajectory(self, idx: int) -> Trajectory:
        return self.candidates[idx][1]


@dataclass(frozen=True)
class AnnotatorInput:
    """Either a clicked target point (ego frame) or a stop request."""

    target: Optional[tuple[float, float]] = None
    stop: bool = False

    def __post_init__(self):
        if self.target is not None and self.stop:
            raise ValueError("target click and stop flag are mutually exclusive")


def make_stop_trajectory(n: int) -> Trajectory:
    """Zero-motion trajectory: n copies of the origin pose."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return Trajectory((Pose2(0.0, 0.0, 0.0),) * n, EGO_START)


def pair_count(m: int) -> int:
    """Number of unordered candidate pairs, m choose 2."""
    if m < 2:
        raise ValueError("m must be >= 2")
    return m * (m - 1) // 2


def derive_rng(seed: int, observation_id: str) -> np.random.Generator:
    """Per-observation generator so parallel generation stays deterministic."""
    digest = hashlib.sha256(f"{seed}:{observation_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def generate_candidates(
    observation_id: str,
    dataset_traj: Trajectory,
    annotator_input: Optional[AnnotatorInput],
    cfg: GenConfig,
    rng: np.random.Generator,
) -> CandidateSet:
    """Build the M-candidate set for one observation.

    Slot 0 is the dataset trajectory. One ccw and one cw rotation follow,
    magnitudes drawn uniformly from [rot_min, rot_max]. Remaining slots are
    filled with alternating extra rotations, except the final slot when
    annotator input exists: a reparameterized target path, or a stop path.
    """
    if len(dataset_traj) != cfg.n:
        raise ValueError(f"dataset trajectory must have length {cfg.n}")
    has_annot = annotator_input is not None and (
        annotator_input.stop or annotator_input.target is not None
    )
    candidates: list[tuple[str, Trajectory]] = [(DATASET, dataset_traj)]
    n_rot = cfg.m - 1 - (1 if has_annot else 0)
    for k in range(n_rot):
        mag = float(rng.uniform(cfg.rot_min, cfg.rot_max))
        if k % 2 == 0:
            candidates.append((ROTATED_CCW, rotate_trajectory(dataset_traj, mag)))
        else:
            candidates.append((ROTATED_CW, rotate_trajectory(dataset_traj, -mag)))
    if has_annot:
        if annotator_input.stop:
            candidates.append((STOP, make_stop_trajectory(cfg.n)))
        else:
            traj = reparameterize_to_target(dataset_traj, annotator_input.target, cfg.n)
            candidates.append((HUMAN_TARGET, traj))
    return CandidateSet(observation_id, tuple(candidates))
