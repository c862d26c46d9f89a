"""Waypoint-predicting policy: a small fully-connected network over
normalized scan ranges plus the relative goal, trained by minimizing mean
squared waypoint distance to either the demonstrated trajectory or the
aggregated preferred trajectory.

Everything is plain numpy with hand-written backprop so training is
deterministic down to the bit for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .candidates import DATASET, CandidateSet
from .geometry import EGO_START, Pose2, Trajectory, heading_from_positions
from .preferences import NoAnnotationsError, PreferenceStore, aggregate_best
from .sim import SensorFrame

LOSS_BC = "bc"
LOSS_CHOP = "chop"

CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class FeatureConfig:
    n_beams: int = 64
    max_range: float = 10.0
    goal_scale: float = 5.0


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0
    loss_kind: str = LOSS_BC
    hidden: int = 64
    weight_init: float = 1.0
    momentum: float = 0.9
    output_scale: float = 3.0
    lr_decay: float = 1.0  # multiplicative per-epoch decay

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class PolicyParams:
    """Weights for input -> hidden -> hidden -> 2N, tanh everywhere.

    The output tanh is scaled by ``output_scale`` so predicted waypoints stay
    within a bounded horizon.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    horizon: int
    output_scale: float = 3.0

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @staticmethod
    def init(input_dim: int, hidden: int, horizon: int, rng: np.random.Generator,
             weight_init: float = 1.0, output_scale: float = 3.0) -> "PolicyParams":
        def layer(n_out, n_in):
            return rng.normal(0.0, weight_init / math.sqrt(n_in), size=(n_out, n_in))

        return PolicyParams(
            w1=layer(hidden, input_dim), b1=np.zeros(hidden),
            w2=layer(hidden, hidden), b2=np.zeros(hidden),
            w3=layer(2 * horizon, hidden), b3=np.zeros(2 * horizon),
            horizon=horizon, output_scale=output_scale,
        )

    def flat(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def copy(self) -> "PolicyParams":
        return PolicyParams(*(a.copy() for a in self.flat()),
                            horizon=self.horizon, output_scale=self.output_scale)

    def save(self, path: Path, seed: Optional[int] = None) -> None:
        data = {
            "version": CHECKPOINT_VERSION,
            "horizon": self.horizon,
            "output_scale": self.output_scale,
            "seed": seed,
            "dims": {"input": int(self.w1.shape[1]), "hidden": int(self.w1.shape[0])},
            "weights": {
                name: arr.tolist()
                for name, arr in zip(("w1", "b1", "w2", "b2", "w3", "b3"), self.flat())
            },
        }
        Path(path).write_text(json.dumps(data))

    @staticmethod
    def load(path: Path) -> "PolicyParams":
        data = json.loads(Path(path).read_text())
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')}")
        w = {k: np.asarray(v, dtype=float) for k, v in data["weights"].items()}
        return PolicyParams(w["w1"], w["b1"], w["w2"], w["b2"], w["w3"], w["b3"],
                            horizon=data["horizon"], output_scale=data["output_scale"])


def encode_features(frame: SensorFrame, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Normalized ranges in [0, 1] followed by the clipped, scaled goal offset."""
    if len(frame.scan.ranges) != cfg.n_beams:
        raise ValueError(f"expected {cfg.n_beams} beams, got {len(frame.scan.ranges)}")
    ranges = np.asarray(frame.scan.ranges) / cfg.max_range
    goal = np.clip(np.asarray(frame.goal) / cfg.goal_scale, -1.0, 1.0)
    return np.concatenate([ranges, goal])


def _forward(params: PolicyParams, x: np.ndarray) -> tuple[np.ndarray, tuple]:
    h1 = np.tanh(x @ params.w1.T + params.b1)
    h2 = np.tanh(h1 @ params.w2.T + params.b2)
    out = params.output_scale * np.tanh(h2 @ params.w3.T + params.b3)
    return out, (x, h1, h2, out)


def predict(params: PolicyParams, features: np.ndarray) -> Trajectory:
    """Forward pass producing an ego-frame trajectory with derived headings."""
    out, _ = _forward(params, np.asarray(features)[None, :])
    pos = out[0].reshape(params.horizon, 2)
    headings = heading_from_positions(pos)
    return Trajectory(
        tuple(Pose2(float(x), float(y), h) for (x, y), h in zip(pos, headings)), EGO_START
    )


def _targets_array(targets: Sequence[Trajectory], horizon: int) -> np.ndarray:
    arr = np.stack([t.positions().reshape(-1) for t in targets])
    if arr.shape[1] != 2 * horizon:
        raise ValueError("target horizon mismatch")
    return arr


def loss(params: PolicyParams, features: np.ndarray, target: Trajectory,
         kind: str = LOSS_BC) -> float:
    """Mean over waypoints of squared position distance to the target.

    The bc and chop variants share the functional form; only the target
    trajectory differs (demonstrated vs preferred).
    """
    if kind not in (LOSS_BC, LOSS_CHOP):
        raise ValueError(f"unknown loss kind {kind!r}")
    out, _ = _forward(params, np.asarray(features)[None, :])
    tgt = _targets_array([target], params.horizon)
    return float(np.sum((out - tgt) ** 2) / params.horizon)


def batch_loss(params: PolicyParams, feats: np.ndarray, tgts: np.ndarray) -> float:
    out, _ = _forward(params, feats)
    return float(np.mean(np.sum((out - tgts) ** 2, axis=1)) / params.horizon)


def grad(params: PolicyParams, batch: Sequence[tuple[np.ndarray, Trajectory]],
         kind: str = LOSS_BC) -> list[np.ndarray]:
    """Exact gradient of the mean batch loss, same layout as params.flat()."""
    if not batch:
        raise ValueError("batch must be non-empty")
    if kind not in (LOSS_BC, LOSS_CHOP):
        raise ValueError(f"unknown loss kind {kind!r}")
    feats = np.stack([np.asarray(f) for f, _ in batch])
    tgts = _targets_array([t for _, t in batch], params.horizon)
    return _grad_arrays(params, feats, tgts)


def _grad_arrays(params: PolicyParams, feats: np.ndarray, tgts: np.ndarray) -> list[np.ndarray]:
    B = feats.shape[0]
    out, (x, h1, h2, _) = _forward(params, feats)
    z3_tanh = out / params.output_scale
    d_out = 2.0 * (out - tgts) / (params.horizon * B)
    d_z3 = d_out * params.output_scale * (1.0 - z3_tanh**2)
    d_h2 = d_z3 @ params.w3
    d_z2 = d_h2 * (1.0 - h2**2)
    d_h1 = d_z2 @ params.w2
    d_z1 = d_h1 * (1.0 - h1**2)
    return [
        d_z1.T @ x, d_z1.sum(axis=0),
        d_z2.T @ h1, d_z2.sum(axis=0),
        d_z3.T @ h2, d_z3.sum(axis=0),
    ]


@dataclass
class TrainResult:
    params: PolicyParams
    loss_curve: list[float]


def train(dataset: Sequence[tuple[np.ndarray, Trajectory]], cfg: TrainConfig,
          params: Optional[PolicyParams] = None) -> TrainResult:
    """Mini-batch SGD with momentum; shuffle order is fixed by the seed."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    feats = np.stack([np.asarray(f) for f, _ in dataset])
    horizon = len(dataset[0][1])
    tgts = _targets_array([t for _, t in dataset], horizon)
    if params is None:
        params = PolicyParams.init(feats.shape[1], cfg.hidden, horizon, rng,
                                   cfg.weight_init, cfg.output_scale)
    else:
        params = params.copy()
    vel = [np.zeros_like(a) for a in params.flat()]
    curve: list[float] = []
    n = len(dataset)
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            g = _grad_arrays(params, feats[idx], tgts[idx])
            for v, a, ga in zip(vel, params.flat(), g):
                v *= cfg.momentum
                v -= lr * ga
                a += v
        lr *= cfg.lr_decay
        ep_loss = batch_loss(params, feats, tgts)
        if not math.isfinite(ep_loss):
            raise TrainingDivergedError(epoch)
        curve.append(ep_loss)
    return TrainResult(params=params, loss_curve=curve)


def distill_targets(
    observations: Sequence[tuple[str, np.ndarray, Trajectory]],
    store: Optional[PreferenceStore],
    mode: str,
    candidate_sets: Optional[dict[str, CandidateSet]] = None,
    rng: Optional[np.random.Generator] = None,
) -> list[tuple[np.ndarray, Trajectory, str]]:
    """Pair each observation with its training target.

    bc mode targets the demonstrated trajectory; chop mode targets the
    candidate that won preference aggregation. ``observations`` rows are
    (observation_id, features, demonstrated trajectory).
    """
    if mode not in (LOSS_BC, LOSS_CHOP):
        raise ValueError(f"unknown mode {mode!r}")
    out: list[tuple[np.ndarray, Trajectory, str]] = []
    if mode == LOSS_BC:
        for obs_id, feats, demo in observations:
            out.append((feats, demo, DATASET))
        return out
    if store is None:
        raise ValueError("chop mode requires a preference store")
    sets = candidate_sets or store.candidate_sets
    rng = rng or np.random.default_rng(0)
    for obs_id, feats, _demo in observations:
        cs = sets.get(obs_id)
        if cs is None:
            raise KeyError(f"no candidate set for {obs_id}")
        recs = store.records_for(obs_id)
        if not recs:
            raise NoAnnotationsError(obs_id)
        best = aggregate_best(cs, recs, rng)
        out.append((feats, cs.trajectory(best), cs.kind(best)))
    return out
