"""End-to-end pipeline glue: dataset generation, oracle annotation,
aggregation, policy training, offline evaluation, closed-loop simulation,
and report assembly. The CLI is a thin wrapper over these functions so tests
can drive the pipeline in-process.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import datafiles as df
from .candidates import DATASET, GenConfig, derive_rng, generate_candidates, pair_count
from .executor import EpisodeConfig, EpisodeLog, run_episode
from .geometry import Pose2, Trajectory
from .metrics import MetricsConfig, evaluate_batch, histogram, scan_to_points
from .policy import (
    LOSS_BC,
    LOSS_CHOP,
    FeatureConfig,
    PolicyParams,
    TrainConfig,
    distill_targets,
    encode_features,
    predict,
    train,
)
from .preferences import PreferenceRecord, PreferenceStore, aggregate_best
from .sim import (
    SCENARIOS,
    LidarConfig,
    NoiseConfig,
    ObservationSample,
    OracleConfig,
    TeleopConfig,
    build_scenario,
    oracle_prefer_scored,
    oracle_scores,
    teleop_surrogate,
)

OBS_FILE = "observations.jsonl"
CAND_FILE = "candidates.jsonl"
PREF_FILE = "preferences.jsonl"
AGG_FILE = "aggregate.jsonl"
AGG_SUMMARY = "aggregate_summary.json"
CONFIG_FILE = "run_config.json"


@dataclass
class RunConfig:
    scenarios: tuple[str, ...] = SCENARIOS
    seed: int = 0
    observations: int = 200
    episodes_per_scenario: int = 12
    sim_episodes: int = 5
    noise: NoiseConfig = field(default_factory=lambda: NoiseConfig(
        sigma_v=0.1, sigma_omega=0.25, lag_ticks=3))
    gen: GenConfig = field(default_factory=GenConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    teleop: TeleopConfig = field(default_factory=TeleopConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    test_fraction: float = 0.2

    def to_dict(self) -> dict:
        def conv(obj):
            if dataclasses.is_dataclass(obj):
                return {k: conv(v) for k, v in dataclasses.asdict(obj).items()}
            if isinstance(obj, (tuple, list)):
                return [conv(v) for v in obj]
            return obj

        return conv(self)


def save_config(cfg: RunConfig, out: Path) -> None:
    df.write_json(Path(out) / CONFIG_FILE, cfg.to_dict())


def gen_data(cfg: RunConfig, out: Path) -> list[ObservationSample]:
    """Teleop the scenarios with noise until enough observations exist, then
    build fully-synthetic candidate sets (no annotator input yet)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    samples: list[ObservationSample] = []
    episode = 0
    while len(samples) < cfg.observations:
        scenario = cfg.scenarios[episode % len(cfg.scenarios)]
        world, start, goal = build_scenario(scenario)
        rng = derive_rng(cfg.seed, f"teleop-{scenario}-{episode}")
        result = teleop_surrogate(
            world, start, goal, cfg.noise, rng, cfg.teleop,
            scenario=scenario, obs_prefix=f"e{episode:03d}-",
        )
        samples.extend(result.samples)
        episode += 1
        if episode > 50 * len(cfg.scenarios):
            break
    samples = samples[: cfg.observations]

    cand_rows = []
    for s in samples:
        rng = derive_rng(cfg.gen.rng_seed or cfg.seed, s.frame.observation_id)
        cs = generate_candidates(s.frame.observation_id, s.executed, None, cfg.gen, rng)
        cand_rows.append(df.candidate_set_to_dict(cs))
    df.write_jsonl(out / OBS_FILE, (df.observation_to_dict(s) for s in samples))
    df.write_jsonl(out / CAND_FILE, cand_rows)
    save_config(cfg, out)
    return samples


def load_dataset(out: Path) -> tuple[list[ObservationSample], dict]:
    out = Path(out)
    samples = [df.observation_from_dict(d) for d in df.read_jsonl(out / OBS_FILE)]
    sets = {}
    for d in df.read_jsonl(out / CAND_FILE):
        cs = df.candidate_set_from_dict(d)
        sets[cs.observation_id] = cs
    return samples, sets


def auto_annotate(cfg: RunConfig, out: Path) -> int:
    """Label every candidate pair of every observation with the oracle."""
    out = Path(out)
    samples, sets = load_dataset(out)
    records = []
    for s in samples:
        cs = sets[s.frame.observation_id]
        cloud = scan_to_points(s.frame.scan)
        scores = oracle_scores(cs, cloud, s.frame.goal, cfg.oracle)
        m = len(cs)
        for i in range(m):
            for j in range(i + 1, m):
                y = oracle_prefer_scored(scores, i, j)
                rec = PreferenceRecord(s.frame.observation_id, i, j, y, "oracle-0", "oracle")
                records.append(json.loads(rec.to_json()))
    df.write_jsonl(out / PREF_FILE, records)
    return len(records)


def load_store(out: Path) -> PreferenceStore:
    out = Path(out)
    _, sets = load_dataset(out)
    return PreferenceStore.load(out / PREF_FILE, sets.values())


def aggregate(cfg: RunConfig, out: Path) -> dict:
    """Per-observation winner table plus dataset summary statistics."""
    out = Path(out)
    store = load_store(out)
    rows = []
    not_dataset = 0
    for obs_id in sorted(store.candidate_sets):
        cs = store.candidate_sets[obs_id]
        rng = derive_rng(cfg.seed, f"agg-{obs_id}")
        best = aggregate_best(cs, store.records_for(obs_id), rng)
        kind = cs.kind(best)
        if kind != DATASET:
            not_dataset += 1
        rows.append({"obs": obs_id, "best_index": best, "best_kind": kind})
    n_obs = len(rows)
    m = cfg.gen.m
    summary = {
        "observations": n_obs,
        "counterfactuals_per_observation": m,
        "total_candidates": n_obs * m,
        "fraction_dataset_not_preferred": (not_dataset / n_obs) if n_obs else 0.0,
        "total_pairwise_comparisons": n_obs * pair_count(m),
    }
    df.write_jsonl(out / AGG_FILE, rows)
    df.write_json(out / AGG_SUMMARY, summary)
    return summary


def split_ids(ids: Sequence[str], seed: int, test_fraction: float) -> tuple[set, set]:
    """Seeded observation-level split; same seed always yields the same split."""
    rng = np.random.default_rng(seed)
    ids = sorted(ids)
    order = rng.permutation(len(ids))
    n_test = max(1, int(round(test_fraction * len(ids))))
    test = {ids[k] for k in order[:n_test]}
    return {i for i in ids if i not in test}, test


def _features_for(samples: Sequence[ObservationSample], cfg: RunConfig):
    return {
        s.frame.observation_id: encode_features(s.frame, cfg.features) for s in samples
    }


def train_policy(cfg: RunConfig, out: Path, loss_kind: str,
                 checkpoint_name: Optional[str] = None) -> Path:
    """Distill targets for the requested mode and fit the policy on the train split."""
    out = Path(out)
    samples, sets = load_dataset(out)
    feats = _features_for(samples, cfg)
    train_ids, _ = split_ids(list(feats), cfg.seed, cfg.test_fraction)
    obs_rows = [
        (s.frame.observation_id, feats[s.frame.observation_id], s.executed)
        for s in samples
        if s.frame.observation_id in train_ids
    ]
    store = load_store(out) if loss_kind == LOSS_CHOP else None
    rng = derive_rng(cfg.seed, "distill")
    pairs = distill_targets(obs_rows, store, loss_kind, sets, rng)
    tcfg = dataclasses.replace(cfg.train, loss_kind=loss_kind)
    result = train([(f, t) for f, t, _ in pairs], tcfg)
    name = checkpoint_name or f"policy_{loss_kind}.json"
    path = out / name
    result.params.save(path, seed=tcfg.seed)
    curve_path = out / f"loss_curve_{loss_kind}.tsv"
    curve_path.write_text(
        "".join(f"{e}\t{l:.9g}\n" for e, l in enumerate(result.loss_curve))
    )
    return path


def eval_offline(cfg: RunConfig, out: Path, checkpoint: Path, tag: str) -> dict:
    """Offline metrics on the held-out split: prediction vs preferred target."""
    out = Path(out)
    samples, sets = load_dataset(out)
    store = load_store(out)
    params = PolicyParams.load(checkpoint)
    feats = _features_for(samples, cfg)
    _, test_ids = split_ids(list(feats), cfg.seed, cfg.test_fraction)
    batch = []
    for s in samples:
        obs_id = s.frame.observation_id
        if obs_id not in test_ids:
            continue
        cs = sets[obs_id]
        rng = derive_rng(cfg.seed, f"agg-{obs_id}")
        best = aggregate_best(cs, store.records_for(obs_id), rng)
        pred = predict(params, feats[obs_id])
        batch.append((pred, cs.trajectory(best), scan_to_points(s.frame.scan)))
    report = evaluate_batch(batch, cfg.metrics)
    df.write_jsonl(out / f"offline_samples_{tag}.jsonl", report.per_sample)
    summary = report.summary()
    summary["histograms"] = {
        key: histogram([r[key] for r in report.per_sample])
        for key in ("deviation", "min_clearance")
    }
    df.write_json(out / f"offline_summary_{tag}.json", summary)
    return summary


def make_policy_fn(params: PolicyParams, fcfg: FeatureConfig):
    def policy(frame):
        return predict(params, encode_features(frame, fcfg))

    return policy


def simulate(cfg: RunConfig, out: Path, checkpoint: Path, tag: str,
             scenarios: Optional[Sequence[str]] = None,
             episodes: Optional[int] = None) -> dict:
    """Closed-loop episodes per scenario through the async executor stack."""
    out = Path(out)
    params = PolicyParams.load(checkpoint)
    policy = make_policy_fn(params, cfg.features)
    scenarios = tuple(scenarios or cfg.scenarios)
    episodes = episodes or cfg.sim_episodes
    logs: list[EpisodeLog] = []
    rows = []
    for scenario in scenarios:
        world, start, goal = build_scenario(scenario)
        for ep in range(episodes):
            # vary the initial pose slightly so trials differ
            rng = derive_rng(cfg.seed, f"sim-{tag}-{scenario}-{ep}")
            jx, jy = rng.uniform(-0.1, 0.1, size=2)
            s = Pose2(start.x + jx, start.y + jy, start.theta)
            log = run_episode(world, policy, s, goal, cfg.episode, scenario)
            logs.append(log)
            rows.append(df.episode_log_to_dict(log))
    df.write_jsonl(out / f"episodes_{tag}.jsonl", rows)
    summary = summarize_episodes(logs)
    df.write_json(out / f"sim_summary_{tag}.json", summary)
    return summary


def summarize_episodes(logs: Sequence[EpisodeLog]) -> dict:
    per_scenario: dict[str, dict] = {}
    for scenario in sorted({l.scenario for l in logs}):
        sub = [l for l in logs if l.scenario == scenario]
        per_scenario[scenario] = {
            "episodes": len(sub),
            "success_rate": float(np.mean([l.success for l in sub])),
            "mean_collisions": float(np.mean([l.collisions for l in sub])),
            "mean_completion": float(np.mean([l.completion for l in sub])),
        }
    return {
        "per_scenario": per_scenario,
        "overall": {
            "episodes": len(logs),
            "success_rate": float(np.mean([l.success for l in logs])),
            "mean_collisions": float(np.mean([l.collisions for l in logs])),
            "mean_completion": float(np.mean([l.completion for l in logs])),
        },
    }


def report(out: Path) -> dict:
    """Side-by-side baseline vs aligned tables from previously written files."""
    out = Path(out)
    result: dict = {"offline": {}, "simulation": {}}
    for tag in (LOSS_BC, LOSS_CHOP):
        p = out / f"offline_summary_{tag}.json"
        if p.exists():
            result["offline"][tag] = df.read_json(p)
        p = out / f"sim_summary_{tag}.json"
        if p.exists():
            result["simulation"][tag] = df.read_json(p)
    agg = out / AGG_SUMMARY
    if agg.exists():
        result["dataset"] = df.read_json(agg)
    df.write_json(out / "report.json", result)
    return result
