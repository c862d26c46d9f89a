"""Line-delimited file formats shared across the pipeline commands.

One JSON object per line throughout: observations, candidate sets,
preference records, aggregation tables, episode logs. Writers are
deterministic so identical configs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .candidates import CandidateSet
from .executor import EpisodeLog
from .geometry import EGO_START, Pose2, Trajectory
from .metrics import LaserScan
from .preferences import PreferenceRecord
from .sim import ObservationSample, SensorFrame


def _round(x: float) -> float:
    # stable textual form without dragging full binary noise into the files
    return float(f"{x:.9g}")


def traj_to_wps(traj: Trajectory) -> list[list[float]]:
    return [[_round(p.x), _round(p.y), _round(p.theta)] for p in traj.waypoints]


def wps_to_traj(wps: list[list[float]], frame_tag: str = EGO_START) -> Trajectory:
    return Trajectory.from_array(wps, frame_tag)


def observation_to_dict(s: ObservationSample) -> dict:
    scan = s.frame.scan
    return {
        "obs": s.frame.observation_id,
        "scan": {
            "amin": _round(scan.angle_min),
            "ainc": _round(scan.angle_increment),
            "ranges": [_round(r) for r in scan.ranges],
            "rmax": scan.max_range,
        },
        "goal": [_round(s.frame.goal[0]), _round(s.frame.goal[1])],
        "exec": traj_to_wps(s.executed),
        "scenario": s.scenario,
        "t": _round(s.frame.stamp),
        "pose": [_round(s.pose.x), _round(s.pose.y), _round(s.pose.theta)],
    }


def observation_from_dict(d: dict) -> ObservationSample:
    scan = LaserScan(d["scan"]["amin"], d["scan"]["ainc"],
                     tuple(d["scan"]["ranges"]), d["scan"]["rmax"])
    frame = SensorFrame(d["obs"], scan, (d["goal"][0], d["goal"][1]), d["t"])
    pose = Pose2(*d.get("pose", (0.0, 0.0, 0.0)))
    return ObservationSample(frame, wps_to_traj(d["exec"]), pose, d["scenario"])


def candidate_set_to_dict(cs: CandidateSet) -> dict:
    return {
        "obs": cs.observation_id,
        "n": len(cs.candidates[0][1]),
        "candidates": [{"kind": k, "wps": traj_to_wps(t)} for k, t in cs.candidates],
    }


def candidate_set_from_dict(d: dict) -> CandidateSet:
    return CandidateSet(
        d["obs"],
        tuple((c["kind"], wps_to_traj(c["wps"])) for c in d["candidates"]),
    )


def episode_log_to_dict(log: EpisodeLog) -> dict:
    return {
        "scenario": log.scenario,
        "success": log.success,
        "collisions": log.collisions,
        "collided_terminated": log.collided_terminated,
        "executed_arclen": _round(log.executed_arclen),
        "planned_arclen": _round(log.planned_arclen),
        "completion": _round(log.completion),
        "rows": [
            {
                "t": _round(r.t),
                "pose": [_round(r.pose.x), _round(r.pose.y), _round(r.pose.theta)],
                "cmd": [_round(r.cmd.v), _round(r.cmd.omega)],
                "target": None if r.target is None
                else [_round(r.target.x), _round(r.target.y), _round(r.target.theta)],
                "collision": r.collision,
            }
            for r in log.rows
        ],
    }


def write_jsonl(path: Path, dicts: Iterable[dict]) -> None:
    with open(path, "w") as f:
        for d in dicts:
            f.write(json.dumps(d, separators=(",", ":")) + "\n")


def read_jsonl(path: Path) -> Iterator[dict]:
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_json(path: Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text())
