"""Pairwise preference storage, winner aggregation, and Bradley-Terry fitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .candidates import ANNOTATOR_KINDS, DATASET, CandidateSet

SOURCE_HUMAN = "human"
SOURCE_ORACLE = "oracle"


class MissingObservationError(KeyError):
    pass


class InvalidRecordError(ValueError):
    pass


class DuplicateRecordError(ValueError):
    pass


class NoAnnotationsError(ValueError):
    pass


class UnderIdentifiedError(ValueError):
    """Some item never appears in any comparison, so its reward is unconstrained."""


@dataclass(frozen=True)
class PreferenceRecord:
    observation_id: str
    i: int
    j: int
    y: int
    annotator_id: str
    source: str = SOURCE_ORACLE

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidRecordError("a preference pair needs two distinct candidates")
        if self.y not in (0, 1):
            raise InvalidRecordError("y must be 0 or 1")
        if self.source not in (SOURCE_HUMAN, SOURCE_ORACLE):
            raise InvalidRecordError(f"unknown source {self.source!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "obs": self.observation_id,
                "i": self.i,
                "j": self.j,
                "y": self.y,
                "annotator": self.annotator_id,
                "source": self.source,
            },
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(line: str) -> "PreferenceRecord":
        d = json.loads(line)
        return PreferenceRecord(d["obs"], d["i"], d["j"], d["y"], d["annotator"], d["source"])


@dataclass
class RewardFit:
    rewards: np.ndarray
    log_likelihood: float
    iterations: int


class PreferenceStore:
    """Append-only preference store keyed by observation.

    Optionally mirrors every accepted record to a line-delimited file so
    concurrent annotation sessions leave a durable, diffable trail.
    """

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else None
        self.candidate_sets: dict[str, CandidateSet] = {}
        self.records: list[PreferenceRecord] = []
        self._seen: set[tuple[str, int, int, str]] = set()

    def add_candidate_set(self, cs: CandidateSet) -> None:
        self.candidate_sets[cs.observation_id] = cs

    def record(self, rec: PreferenceRecord) -> None:
        cs = self.candidate_sets.get(rec.observation_id)
        if cs is None:
            raise MissingObservationError(rec.observation_id)
        if not (0 <= rec.i < len(cs)) or not (0 <= rec.j < len(cs)):
            raise InvalidRecordError(
                f"candidate index out of range for {rec.observation_id}"
            )
        key = (rec.observation_id, rec.i, rec.j, rec.annotator_id)
        if key in self._seen:
            raise DuplicateRecordError(str(key))
        self.records.append(rec)
        self._seen.add(key)
        if self.path is not None:
            with open(self.path, "a") as f:
                f.write(rec.to_json() + "\n")

    def records_for(self, observation_id: str) -> list[PreferenceRecord]:
        return [r for r in self.records if r.observation_id == observation_id]

    def __len__(self) -> int:
        return len(self.records)

    @staticmethod
    def load(path: Path, candidate_sets: Iterable[CandidateSet]) -> "PreferenceStore":
        store = PreferenceStore()
        for cs in candidate_sets:
            store.add_candidate_set(cs)
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    store.record(PreferenceRecord.from_json(line))
        return store


def win_counts(recs: Sequence[PreferenceRecord], n_items: int) -> np.ndarray:
    wins = np.zeros(n_items, dtype=int)
    for r in recs:
        wins[r.i if r.y == 1 else r.j] += 1
    return wins


def aggregate_best(
    cs: CandidateSet,
    recs: Sequence[PreferenceRecord],
    rng: np.random.Generator,
) -> int:
    """Index of the candidate winning the most pairwise comparisons.

    Ties break toward annotator-suggested candidates (human target or stop),
    then the dataset trajectory, then a seeded-uniform draw.
    """
    if not recs:
        raise NoAnnotationsError(cs.observation_id)
    wins = win_counts(recs, len(cs))
    best = int(wins.max())
    tied = [i for i in range(len(cs)) if wins[i] == best]
    if len(tied) == 1:
        return tied[0]
    annot = [i for i in tied if cs.kind(i) in ANNOTATOR_KINDS]
    if annot:
        return annot[0]
    ds = [i for i in tied if cs.kind(i) == DATASET]
    if ds:
        return ds[0]
    return int(tied[int(rng.integers(len(tied)))])


def pref_probability(r_i: float, r_j: float) -> float:
    """Probability that item i beats item j under logistic pairwise scoring."""
    if not (math.isfinite(r_i) and math.isfinite(r_j)):
        raise ValueError("rewards must be finite")
    d = r_i - r_j
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


def _bt_log_likelihood(r: np.ndarray, wins: np.ndarray, l2: float) -> float:
    diff = r[:, None] - r[None, :]
    # log sigma(diff), numerically stable
    log_p = -np.logaddexp(0.0, -diff)
    return float(np.sum(wins * log_p) - 0.5 * l2 * np.sum(r * r))


def fit_bradley_terry(
    recs: Sequence[PreferenceRecord] | Sequence[tuple[int, int, int]],
    n_items: int,
    l2: float = 1e-3,
    max_iter: int = 10_000,
    tol: float = 1e-8,
) -> RewardFit:
    """Maximum-likelihood pairwise rewards via gradient ascent.

    Accepts PreferenceRecords or raw (i, j, y) tuples. The likelihood is the
    L2-regularized Bernoulli likelihood of the logistic pairwise model; the
    step size halves whenever a step would decrease it. Fitted rewards are
    mean-centered (the model is invariant to a shared offset).
    """
    wins = np.zeros((n_items, n_items))
    for rec in recs:
        if isinstance(rec, PreferenceRecord):
            i, j, y = rec.i, rec.j, rec.y
        else:
            i, j, y = rec
        if y == 1:
            wins[i, j] += 1
        else:
            wins[j, i] += 1
    appears = (wins.sum(axis=0) + wins.sum(axis=1)) > 0
    if not appears.all():
        missing = np.flatnonzero(~appears).tolist()
        raise UnderIdentifiedError(f"items with no comparisons: {missing}")

    r = np.zeros(n_items)
    ll = _bt_log_likelihood(r, wins, l2)
    step = 1.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        diff = r[:, None] - r[None, :]
        sig = 1.0 / (1.0 + np.exp(-np.clip(diff, -40, 40)))
        # d/dr_i of sum wins[i,j] log sig(r_i - r_j) over both roles
        grad = np.sum(wins * (1.0 - sig), axis=1) - np.sum(wins.T * (1.0 - sig.T), axis=1)
        grad -= l2 * r
        if np.max(np.abs(grad)) < tol:
            break
        while step > 1e-12:
            cand = r + step * grad
            cand_ll = _bt_log_likelihood(cand, wins, l2)
            if cand_ll >= ll:
                r, ll = cand, cand_ll
                step = min(step * 2.0, 1.0)
                break
            step *= 0.5
        else:
            break
    r = r - r.mean()
    return RewardFit(rewards=r, log_likelihood=ll, iterations=iterations)
