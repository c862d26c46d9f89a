"""Annotation task service: serves target-click and pairwise-preference tasks
over HTTP, enforces the disjoint-annotator rule, and exports the collected
dataset in the pipeline's file formats.

Tasks are leased with a timeout; an unanswered lease is requeued on the next
poll, so pair coverage survives abandoned sessions.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from . import datafiles as df
from .candidates import AnnotatorInput, GenConfig, derive_rng, generate_candidates, pair_count
from .geometry import (
    DegeneratePathError,
    DegenerateTargetError,
    Pose2,
    ScaleOutOfRangeError,
    to_frame,
)
from .preferences import (
    DuplicateRecordError,
    PreferenceRecord,
    PreferenceStore,
)
from .pipeline import AGG_SUMMARY, CAND_FILE, PREF_FILE
from .sim import ObservationSample, World

ROLE_TARGET = "target_provider"
ROLE_PREFERENCE = "preference_labeler"

LEASE_TIMEOUT_S = 600.0

_PALETTE = ["#4878cf", "#e07b39", "#6aa84f", "#8e63b5"]


@dataclass
class Lease:
    annotator_id: str
    expires: float


@dataclass
class TargetTask:
    task_id: str
    observation_id: str
    lease: Optional[Lease] = None
    done: bool = False


@dataclass
class PreferenceTask:
    task_id: str
    observation_id: str
    i: int
    j: int
    flip: bool       # presentation order randomization
    colors: tuple[str, str]
    lease: Optional[Lease] = None
    done: bool = False


class AnnotationService:
    def __init__(self, world: World, samples: list[ObservationSample],
                 gen: GenConfig, out_dir: Path, seed: int = 0,
                 lease_timeout: float = LEASE_TIMEOUT_S,
                 clock=time.monotonic):
        self.world = world
        self.samples = {s.frame.observation_id: s for s in samples}
        self.order = [s.frame.observation_id for s in samples]
        self.gen = gen
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.lease_timeout = lease_timeout
        self.clock = clock
        self.store = PreferenceStore()
        self.target_tasks: dict[str, TargetTask] = {}
        self.pref_tasks: dict[str, PreferenceTask] = {}
        self.target_provider: dict[str, str] = {}  # obs -> annotator who clicked
        self._pref_order: list[str] = []
        for obs_id in self.order:
            tid = f"target-{obs_id}"
            self.target_tasks[tid] = TargetTask(tid, obs_id)

    # -- task serving -------------------------------------------------------

    def _lease_ok(self, lease: Optional[Lease]) -> bool:
        return lease is not None and lease.expires > self.clock()

    def next_task(self, annotator_id: str, role: str) -> Optional[dict]:
        now = self.clock()
        if role == ROLE_TARGET:
            for obs_id in self.order:
                task = self.target_tasks[f"target-{obs_id}"]
                if task.done or self._lease_ok(task.lease):
                    continue
                task.lease = Lease(annotator_id, now + self.lease_timeout)
                return self._target_payload(task)
            return None
        if role == ROLE_PREFERENCE:
            for tid in self._pref_order:
                task = self.pref_tasks[tid]
                if task.done or self._lease_ok(task.lease):
                    continue
                # disjointness: never label pairs for your own target click
                if self.target_provider.get(task.observation_id) == annotator_id:
                    continue
                task.lease = Lease(annotator_id, now + self.lease_timeout)
                return self._preference_payload(task)
            return None
        raise HTTPException(400, detail={"code": "invalid-role", "message": role})

    def _scene_payload(self, obs_id: str) -> dict:
        s = self.samples[obs_id]
        t = s.frame.stamp
        return {
            "segments": [list(map(list, seg)) for seg in self.world.static_segments],
            "circles": [[list(c), r] for c, r in self.world.static_circles],
            "agents": [
                {"pos": a.position(t).tolist(), "radius": a.radius} for a in self.world.agents
            ],
            "robot": [s.pose.x, s.pose.y, s.pose.theta],
            "goal_ego": list(s.frame.goal),
            "bounds": list(self.world.bounds),
            "dataset_traj": df.traj_to_wps(s.executed),
        }

    def _target_payload(self, task: TargetTask) -> dict:
        return {
            "task_id": task.task_id,
            "observation_id": task.observation_id,
            "phase": "target",
            "scene": self._scene_payload(task.observation_id),
            "pair": None,
        }

    def _preference_payload(self, task: PreferenceTask) -> dict:
        cs = self.store.candidate_sets[task.observation_id]
        first, second = (task.j, task.i) if task.flip else (task.i, task.j)
        return {
            "task_id": task.task_id,
            "observation_id": task.observation_id,
            "phase": "preference",
            "scene": self._scene_payload(task.observation_id),
            "pair": {
                "candidates": [
                    {"index": first, "kind": cs.kind(first),
                     "wps": df.traj_to_wps(cs.trajectory(first)), "color": task.colors[0]},
                    {"index": second, "kind": cs.kind(second),
                     "wps": df.traj_to_wps(cs.trajectory(second)), "color": task.colors[1]},
                ]
            },
        }

    # -- submissions --------------------------------------------------------

    def submit_target(self, annotator_id: str, observation_id: str,
                      x: Optional[float], y: Optional[float], stop: bool) -> None:
        task = self.target_tasks.get(f"target-{observation_id}")
        if task is None:
            raise HTTPException(404, detail={"code": "missing-observation",
                                             "message": observation_id})
        if task.done:
            raise HTTPException(409, detail={"code": "duplicate-record",
                                             "message": observation_id})
        if stop and (x is not None or y is not None):
            raise HTTPException(400, detail={"code": "invalid-argument",
                                             "message": "click and stop are exclusive"})
        if not stop:
            if x is None or y is None:
                raise HTTPException(400, detail={"code": "invalid-argument",
                                                 "message": "need a click or stop"})
            xmin, ymin, xmax, ymax = self.world.bounds
            sample = self.samples[observation_id]
            # clicks arrive in the scene (odom) frame; candidates live in ego
            wx, wy = x, y
            if not (xmin <= wx <= xmax and ymin <= wy <= ymax):
                raise HTTPException(400, detail={"code": "out-of-bounds",
                                                 "message": f"({wx}, {wy})"})
            ego = to_frame(Pose2(wx, wy, 0.0), sample.pose)
            annot = AnnotatorInput(target=(ego.x, ego.y))
        else:
            annot = AnnotatorInput(stop=True)
        sample = self.samples[observation_id]
        rng = derive_rng(self.seed, observation_id)
        try:
            cs = generate_candidates(observation_id, sample.executed, annot, self.gen, rng)
        except DegenerateTargetError as e:
            raise HTTPException(400, detail={"code": "degenerate-target", "message": str(e)})
        except DegeneratePathError as e:
            raise HTTPException(400, detail={"code": "degenerate-path", "message": str(e)})
        except ScaleOutOfRangeError as e:
            raise HTTPException(400, detail={"code": "out-of-bounds", "message": str(e)})
        self.store.add_candidate_set(cs)
        self.target_provider[observation_id] = annotator_id
        task.done = True
        task.lease = None
        prng = derive_rng(self.seed, f"present-{observation_id}")
        for i, j in itertools.combinations(range(len(cs)), 2):
            tid = f"pref-{observation_id}-{i}-{j}"
            colors = tuple(prng.choice(_PALETTE, size=2, replace=False).tolist())
            self.pref_tasks[tid] = PreferenceTask(
                tid, observation_id, i, j, flip=bool(prng.integers(2)), colors=colors
            )
            self._pref_order.append(tid)

    def submit_preference(self, annotator_id: str, task_id: str, choice: int) -> None:
        task = self.pref_tasks.get(task_id)
        if task is None:
            raise HTTPException(404, detail={"code": "stale-task", "message": task_id})
        if task.done:
            raise HTTPException(409, detail={"code": "duplicate-record", "message": task_id})
        lease = task.lease
        if lease is None or lease.annotator_id != annotator_id or not self._lease_ok(lease):
            raise HTTPException(409, detail={"code": "stale-task", "message": task_id})
        if choice not in (task.i, task.j):
            raise HTTPException(400, detail={"code": "invalid-record",
                                             "message": f"choice {choice} not in pair"})
        rec = PreferenceRecord(task.observation_id, task.i, task.j,
                               1 if choice == task.i else 0, annotator_id, "human")
        try:
            self.store.record(rec)
        except DuplicateRecordError:
            raise HTTPException(409, detail={"code": "duplicate-record", "message": task_id})
        task.done = True
        task.lease = None

    # -- export -------------------------------------------------------------

    def export(self) -> dict:
        sets = [self.store.candidate_sets[o] for o in self.order
                if o in self.store.candidate_sets]
        df.write_jsonl(self.out_dir / CAND_FILE,
                       (df.candidate_set_to_dict(cs) for cs in sets))
        df.write_jsonl(self.out_dir / PREF_FILE,
                       (json.loads(r.to_json()) for r in self.store.records))
        labeled = {
            cs.observation_id
            for cs in sets
            if len({(min(r.i, r.j), max(r.i, r.j))
                    for r in self.store.records_for(cs.observation_id)})
            >= pair_count(len(cs))
        }
        m = self.gen.m
        summary = {
            "observations": len(sets),
            "fully_labeled_observations": len(labeled),
            "counterfactuals_per_observation": m,
            "total_candidates": len(sets) * m,
            "total_pairwise_comparisons": len(labeled) * pair_count(m),
            "records": len(self.store.records),
        }
        df.write_json(self.out_dir / AGG_SUMMARY, summary)
        return summary


# -- HTTP layer -------------------------------------------------------------


class TargetSubmission(BaseModel):
    annotator: str
    obs: str
    x: Optional[float] = None
    y: Optional[float] = None
    stop: bool = False


class PreferenceSubmission(BaseModel):
    annotator: str
    task_id: str
    choice: int


def create_app(service: AnnotationService) -> FastAPI:
    app = FastAPI(title="navpref annotation service")
    app.state.service = service

    @app.get("/task")
    def get_task(role: str = Query(...), annotator: str = Query(...)):
        task = service.next_task(annotator, role)
        if task is None:
            return {"task": None}
        return {"task": task}

    @app.post("/target")
    def post_target(body: TargetSubmission):
        service.submit_target(body.annotator, body.obs, body.x, body.y, body.stop)
        return {"ok": True}

    @app.post("/preference")
    def post_preference(body: PreferenceSubmission):
        service.submit_preference(body.annotator, body.task_id, body.choice)
        return {"ok": True}

    @app.get("/export")
    def get_export():
        return service.export()

    return app
