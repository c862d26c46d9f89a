"""Command-line entry points for the full pipeline.

Typical run:

    navpref gen-data --out runs/a --seed 7 --observations 1000
    navpref auto-annotate --out runs/a
    navpref aggregate --out runs/a
    navpref train --out runs/a --loss bc
    navpref train --out runs/a --loss chop
    navpref eval-offline --out runs/a --checkpoint runs/a/policy_chop.json --loss chop
    navpref simulate --out runs/a --checkpoint runs/a/policy_chop.json --loss chop
    navpref report --out runs/a
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import pipeline
from .candidates import GenConfig
from .policy import LOSS_BC, LOSS_CHOP, TrainConfig
from .sim import SCENARIOS, NoiseConfig


def _load_config(config_path, seed, observations) -> pipeline.RunConfig:
    cfg = pipeline.RunConfig()
    if config_path:
        data = json.loads(Path(config_path).read_text())
        cfg = dataclasses.replace(
            cfg,
            scenarios=tuple(data.get("scenarios", cfg.scenarios)),
            seed=data.get("seed", cfg.seed),
            observations=data.get("observations", cfg.observations),
            sim_episodes=data.get("sim_episodes", cfg.sim_episodes),
        )
        if "noise" in data:
            cfg = dataclasses.replace(cfg, noise=NoiseConfig(**data["noise"]))
        if "gen" in data:
            cfg = dataclasses.replace(cfg, gen=GenConfig(**data["gen"]))
        if "train" in data:
            cfg = dataclasses.replace(cfg, train=TrainConfig(**data["train"]))
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if observations is not None:
        cfg = dataclasses.replace(cfg, observations=observations)
    return cfg


def _fail(name: str, exc: Exception):
    click.echo(f"{name}: {exc}", err=True)
    sys.exit(1)


common = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--out", "out_dir", type=click.Path(), required=True),
]


def with_common(f):
    for opt in reversed(common):
        f = opt(f)
    return f


@click.group()
def main():
    """Counterfactual-preference navigation pipeline."""


@main.command("gen-data")
@with_common
@click.option("--observations", type=int, default=None)
def gen_data(config_path, seed, out_dir, observations):
    cfg = _load_config(config_path, seed, observations)
    try:
        samples = pipeline.gen_data(cfg, Path(out_dir))
    except OSError as e:
        _fail("io-error", e)
    click.echo(f"wrote {len(samples)} observations to {out_dir}")


@main.command("auto-annotate")
@with_common
def auto_annotate(config_path, seed, out_dir):
    cfg = _load_config(config_path, seed, None)
    n = pipeline.auto_annotate(cfg, Path(out_dir))
    click.echo(f"wrote {n} oracle preference records")


@main.command("aggregate")
@with_common
def aggregate(config_path, seed, out_dir):
    cfg = _load_config(config_path, seed, None)
    summary = pipeline.aggregate(cfg, Path(out_dir))
    click.echo(json.dumps(summary, indent=2))


@main.command("train")
@with_common
@click.option("--loss", "loss_kind", type=click.Choice([LOSS_BC, LOSS_CHOP]), required=True)
def train(config_path, seed, out_dir, loss_kind):
    cfg = _load_config(config_path, seed, None)
    try:
        path = pipeline.train_policy(cfg, Path(out_dir), loss_kind)
    except Exception as e:
        _fail("training-failed", e)
    click.echo(f"checkpoint: {path}")


@main.command("eval-offline")
@with_common
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--loss", "tag", type=click.Choice([LOSS_BC, LOSS_CHOP]), required=True)
def eval_offline(config_path, seed, out_dir, checkpoint, tag):
    cfg = _load_config(config_path, seed, None)
    summary = pipeline.eval_offline(cfg, Path(out_dir), Path(checkpoint), tag)
    summary.pop("histograms", None)
    click.echo(json.dumps(summary, indent=2))


@main.command("simulate")
@with_common
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--loss", "tag", type=click.Choice([LOSS_BC, LOSS_CHOP]), required=True)
@click.option("--scenario", "scenarios", multiple=True,
              type=click.Choice(SCENARIOS), default=None)
@click.option("--episodes", type=int, default=None)
def simulate(config_path, seed, out_dir, checkpoint, tag, scenarios, episodes):
    cfg = _load_config(config_path, seed, None)
    summary = pipeline.simulate(cfg, Path(out_dir), Path(checkpoint), tag,
                                scenarios or None, episodes)
    click.echo(json.dumps(summary, indent=2))


@main.command("report")
@click.option("--out", "out_dir", type=click.Path(exists=True), required=True)
def report(out_dir):
    result = pipeline.report(Path(out_dir))
    click.echo(json.dumps(result, indent=2))


@main.command("annotate-serve")
@with_common
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8642)
@click.option("--scenario", "scenario", type=click.Choice(SCENARIOS),
              default="open_space")
def annotate_serve(config_path, seed, out_dir, host, port, scenario):
    """Serve annotation tasks for an existing dataset over HTTP."""
    import uvicorn

    from .service import AnnotationService, create_app
    from .sim import build_scenario

    cfg = _load_config(config_path, seed, None)
    out = Path(out_dir)
    samples, _ = pipeline.load_dataset(out)
    world, _, _ = build_scenario(scenario)
    service = AnnotationService(world, samples, cfg.gen, out, seed=cfg.seed)
    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
