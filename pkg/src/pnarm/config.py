"""Run configuration: YAML tree plus command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .mcmc import McmcConfig
from .model import POPULATION_ADJUSTED, RAW
from .priors import CoefficientPrior, DdpHyper, FmmHyper


class ConfigError(Exception):
    """The configuration is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class PathsConfig:
    counts: str | None = None
    edges: str | None = None
    population: str | None = None
    output_dir: str | None = None


@dataclass(frozen=True)
class ModelConfig:
    mode: str = RAW
    c: float | None = None


@dataclass(frozen=True)
class EvalConfig:
    t_train: int | None = None
    stacking_window: int = 4
    pit_seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    labels: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    t_len: int = 0
    y_init: list | None = None
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    paths: PathsConfig
    model: ModelConfig
    prior: DdpHyper | FmmHyper
    coeff_prior: CoefficientPrior
    mcmc: McmcConfig
    eval: EvalConfig
    sim: SimConfig | None = None
    raw_tree: dict = field(default_factory=dict, repr=False)


def load_config(path, overrides: list[str] | None = None) -> RunConfig:
    """Load a YAML config file and apply ``section.key=value`` overrides."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p) as fh:
            tree = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    for item in overrides or []:
        _apply_override(tree, item)
    return build_config(tree)


def build_config(tree: dict) -> RunConfig:
    paths = _section(tree, "paths")
    model = _section(tree, "model")
    prior = _section(tree, "prior")
    coeff = _section(tree, "coeff_prior")
    mcmc = _section(tree, "mcmc")
    ev = _section(tree, "eval")
    sim = _section(tree, "sim")

    try:
        paths_cfg = PathsConfig(**_pick(paths, ("counts", "edges", "population", "output_dir")))
    except TypeError as exc:
        raise ConfigError(f"bad paths section: {exc}") from exc

    mode = model.get("mode", RAW)
    if mode not in (RAW, POPULATION_ADJUSTED):
        raise ConfigError(f"model.mode must be '{RAW}' or '{POPULATION_ADJUSTED}', got {mode!r}")
    c = model.get("c")
    if c is not None:
        c = float(c)
        if c <= 0:
            raise ConfigError("model.c must be positive")
    model_cfg = ModelConfig(mode=mode, c=c)

    prior_obj = _build_prior(prior)

    try:
        coeff_prior = CoefficientPrior(
            shape=float(coeff.get("shape", 1.0)),
            rate=float(coeff.get("rate", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad coeff_prior section: {exc}") from exc

    try:
        mcmc_cfg = McmcConfig(**_pick(mcmc, (
            "iterations", "burn_in", "thinning", "aux_components",
            "rw_step", "adapt", "seed", "chains", "randomize_order",
        )))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mcmc section: {exc}") from exc

    t_train = ev.get("t_train")
    if t_train is not None:
        t_train = int(t_train)
        if t_train < 2:
            raise ConfigError("eval.t_train must be at least 2")
    window = int(ev.get("stacking_window", 4))
    if window < 1:
        raise ConfigError("eval.stacking_window must be at least 1")
    eval_cfg = EvalConfig(t_train=t_train, stacking_window=window,
                          pit_seed=int(ev.get("pit_seed", 0)))

    sim_cfg = None
    if sim:
        try:
            sim_cfg = SimConfig(
                labels=list(sim["labels"]),
                thetas=[list(map(float, row)) for row in sim["thetas"]],
                t_len=int(sim["t_len"]),
                y_init=list(sim["y_init"]) if sim.get("y_init") is not None else None,
                seed=int(sim.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad sim section: {exc}") from exc

    return RunConfig(
        paths=paths_cfg,
        model=model_cfg,
        prior=prior_obj,
        coeff_prior=coeff_prior,
        mcmc=mcmc_cfg,
        eval=eval_cfg,
        sim=sim_cfg,
        raw_tree=tree,
    )


def _build_prior(prior: dict):
    kind = prior.get("kind", "ddp")
    try:
        if kind == "ddp":
            return DdpHyper(
                alpha=float(prior.get("alpha", 1.0)),
                decay=float(prior.get("decay", 0.0)),
            )
        if kind == "fmm":
            return FmmHyper(
                components=int(prior.get("components", 1)),
                gamma0=float(prior.get("gamma0", 1.0)),
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad prior section: {exc}") from exc
    raise ConfigError(f"prior.kind must be 'ddp' or 'fmm', got {kind!r}")


def _section(tree: dict, name: str) -> dict:
    sec = tree.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return sec


def _pick(mapping: dict, keys) -> dict:
    unknown = set(mapping) - set(keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return {k: mapping[k] for k in keys if k in mapping}


def _apply_override(tree: dict, item: str):
    """Apply one ``section.key=value`` override; values parse as YAML scalars."""
    if "=" not in item:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    dotted, raw_val = item.split("=", 1)
    keys = dotted.strip().split(".")
    if not all(keys):
        raise ConfigError(f"bad override key {dotted!r}")
    try:
        value = yaml.safe_load(raw_val)
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad override value {raw_val!r}: {exc}") from exc
    node = tree
    for key in keys[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[keys[-1]] = value
