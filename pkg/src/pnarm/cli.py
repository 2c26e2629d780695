"""Command-line interface: simulate, fit, forecast, score, stack.

Every command is driven by a YAML config plus ``--set section.key=value``
overrides (flags win over the file). Outputs land in the directory given
by ``--output-dir``, the config's ``paths.output_dir``, the
``PNARM_OUTPUT_DIR`` environment variable, or the working directory, in
that order of precedence.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 samples/data mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .evaluation import log_score, mase, randomized_pit_cells, stacking_objective, stacking_weights
from .graph import Network
from .io import (
    ArtifactMismatchError,
    DataFormatError,
    build_network,
    read_counts_csv,
    read_draws_jsonl,
    read_edges_csv,
    read_population_csv,
    write_counts_csv,
    write_draws_jsonl,
    write_json,
    write_matrix_csv,
    write_table_csv,
)
from .mcmc import run_multichain
from .model import build_predictors, horizon_inputs
from .posterior import (
    cell_predictive_rates,
    cocluster_matrix,
    least_squares_partition,
    mixture_pmf,
    partition_loss,
    pooled_draws,
    posterior_predictive,
    predictive_rates,
)
from .simulate import SimSpec, simulate

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_MISMATCH = 4


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArtifactMismatchError as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnarm",
        description="Poisson network autoregression mixtures: fit, forecast, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry, e.g. --set mcmc.seed=7 (repeatable)",
        )
        p.add_argument("--output-dir", default=None, help="directory for outputs")

    p_sim = sub.add_parser("simulate", help="draw a count series from the generative model")
    common(p_sim)
    p_sim.add_argument("--out", default=None, help="output counts CSV (default simulated_counts.csv)")
    p_sim.set_defaults(handler=cmd_simulate)

    p_fit = sub.add_parser("fit", help="run the posterior sampler and write draws")
    common(p_fit)
    p_fit.set_defaults(handler=cmd_fit)

    p_fc = sub.add_parser("forecast", help="one-step-ahead predictive report from draws")
    common(p_fc)
    p_fc.add_argument("--samples", required=True, nargs="+", help="draws JSONL file(s)")
    p_fc.add_argument("--weights", default=None, help="chain weights JSON from 'stack'")
    p_fc.set_defaults(handler=cmd_forecast)

    p_sc = sub.add_parser("score", help="log scores, scaled errors, and randomized PITs")
    common(p_sc)
    p_sc.add_argument("--samples", required=True, nargs="+", help="draws JSONL file(s)")
    p_sc.add_argument("--weights", default=None, help="chain weights JSON from 'stack'")
    p_sc.set_defaults(handler=cmd_score)

    p_st = sub.add_parser("stack", help="validation-window stacking weights for chains")
    common(p_st)
    p_st.add_argument("--samples", required=True, nargs="+", help="one draws JSONL per chain")
    p_st.add_argument("--out", default=None, help="output weights JSON (default stack_weights.json)")
    p_st.set_defaults(handler=cmd_stack)

    return parser


def _out_dir(args, cfg: RunConfig) -> Path:
    chosen = args.output_dir or cfg.paths.output_dir or os.environ.get("PNARM_OUTPUT_DIR") or "."
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_network(cfg: RunConfig, node_ids: list[str]) -> Network:
    if cfg.paths.edges is None:
        raise ConfigError("paths.edges is required")
    edges = read_edges_csv(cfg.paths.edges)
    population = None
    if cfg.paths.population:
        population = read_population_csv(cfg.paths.population)
    return build_network(node_ids, edges, population)


def _load_counts(cfg: RunConfig):
    if cfg.paths.counts is None:
        raise ConfigError("paths.counts is required")
    return read_counts_csv(cfg.paths.counts)


def _fit_window(cfg: RunConfig, counts: np.ndarray) -> np.ndarray:
    t_train = cfg.eval.t_train
    if t_train is None:
        return counts
    if t_train > counts.shape[1]:
        raise ConfigError(
            f"eval.t_train={t_train} exceeds the {counts.shape[1]} observed time steps"
        )
    return counts[:, :t_train]


def _load_samples(args, n_nodes: int):
    """Read one or more draws files, pool them, and apply chain weights."""
    chains = [read_draws_jsonl(path) for path in args.samples]
    for path, chain in zip(args.samples, chains):
        if chain.n != n_nodes:
            raise ArtifactMismatchError(
                f"{path} has draws over {chain.n} nodes but the data has {n_nodes}"
            )
    chain_weights = None
    if getattr(args, "weights", None):
        with open(args.weights) as fh:
            payload = json.load(fh)
        chain_weights = np.asarray(payload["weights"], dtype=float)
        if chain_weights.shape != (len(chains),):
            raise ArtifactMismatchError(
                f"{args.weights} has {chain_weights.size} weights for {len(chains)} chains"
            )
    return pooled_draws(chains, chain_weights)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.overrides)
    if cfg.sim is None:
        raise ConfigError("simulate needs a 'sim' config section")
    if cfg.paths.edges is None:
        raise ConfigError("paths.edges is required")
    edges = read_edges_csv(cfg.paths.edges)
    node_ids = sorted({node for edge in edges for node in edge})
    population = None
    if cfg.paths.population:
        population = read_population_csv(cfg.paths.population)
        node_ids = sorted(set(node_ids) | set(population))
    net = build_network(node_ids, edges, population)
    try:
        spec = SimSpec(
            network=net,
            labels=np.asarray(cfg.sim.labels, dtype=np.int64),
            thetas=np.asarray(cfg.sim.thetas, dtype=float),
            t_len=cfg.sim.t_len,
            y_init=None if cfg.sim.y_init is None else np.asarray(cfg.sim.y_init),
            mode=cfg.model.mode,
            c=cfg.model.c,
            seed=cfg.sim.seed,
        )
    except ValueError as exc:
        raise ConfigError(f"bad sim section: {exc}") from exc
    counts = simulate(spec)
    out_dir = _out_dir(args, cfg)
    out = Path(args.out) if args.out else out_dir / "simulated_counts.csv"
    write_counts_csv(out, node_ids, counts)
    print(f"wrote {out}")
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args.config, args.overrides)
    node_ids, _, counts = _load_counts(cfg)
    net = _load_network(cfg, node_ids)
    y_fit = _fit_window(cfg, counts)
    if y_fit.shape[1] < 1:
        raise ConfigError("fit window is empty")
    preds = build_predictors(y_fit, net, cfg.model.mode, cfg.model.c)
    chains = run_multichain(y_fit, net, preds, cfg.prior, cfg.mcmc, cfg.coeff_prior)
    out_dir = _out_dir(args, cfg)
    draw_files = []
    for c_idx, chain in enumerate(chains):
        name = "draws.jsonl" if cfg.mcmc.chains == 1 else f"draws_chain{c_idx:02d}.jsonl"
        write_draws_jsonl(out_dir / name, chain)
        draw_files.append(name)
    manifest = {
        "package_version": __version__,
        "config": cfg.raw_tree,
        "seed": cfg.mcmc.seed,
        "chains": cfg.mcmc.chains,
        "fit_time_steps": int(y_fit.shape[1]),
        "draws_per_chain": int(chains[0].m),
        "draws_files": draw_files,
        "acceptance": [
            {
                "proposed": chain.acceptance.proposed,
                "accepted": chain.acceptance.accepted,
                "rate": None
                if chain.acceptance.proposed == 0
                else chain.acceptance.accepted / chain.acceptance.proposed,
            }
            for chain in chains
        ],
    }
    write_json(out_dir / "manifest.json", manifest)
    print(f"wrote {len(draw_files)} draws file(s) and manifest.json to {out_dir}")
    return 0


def cmd_forecast(args) -> int:
    cfg = load_config(args.config, args.overrides)
    node_ids, _, counts = _load_counts(cfg)
    net = _load_network(cfg, node_ids)
    y_fit = _fit_window(cfg, counts)
    samples, weights = _load_samples(args, len(node_ids))
    v, x_last, y_last = horizon_inputs(y_fit, net, cfg.model.mode, cfg.model.c)
    dist = posterior_predictive(samples, v, x_last, y_last, weights)
    out_dir = _out_dir(args, cfg)

    quantiles = (0.05, 0.25, 0.5, 0.75, 0.95)
    rows = []
    pmf_rows = []
    for i, node in enumerate(node_ids):
        table = dist.pmf_table(i)
        cdf = np.cumsum(table)
        qs = [int(np.searchsorted(cdf, q)) for q in quantiles]
        rows.append([node, f"{dist.point_forecast(i):.10g}", *qs])
        for y_val, p in enumerate(table):
            pmf_rows.append([node, y_val, f"{p:.10g}", f"{min(cdf[y_val], 1.0):.10g}"])
    write_table_csv(
        out_dir / "forecast.csv",
        ["node", "point_forecast", *[f"q{int(q * 100):02d}" for q in quantiles]],
        rows,
    )
    write_table_csv(out_dir / "pmf.csv", ["node", "y", "pmf", "cdf"], pmf_rows)

    c_hat = cocluster_matrix(samples)
    best, labels = least_squares_partition(samples, c_hat)
    write_matrix_csv(out_dir / "cocluster.csv", node_ids, c_hat)
    write_json(
        out_dir / "partition.json",
        {
            "draw_index": best,
            "loss": partition_loss(labels, c_hat),
            "labels": {node: int(lab) for node, lab in zip(node_ids, labels)},
        },
    )
    print(f"wrote forecast.csv, pmf.csv, cocluster.csv, partition.json to {out_dir}")
    return 0


def cmd_score(args) -> int:
    cfg = load_config(args.config, args.overrides)
    node_ids, _, counts = _load_counts(cfg)
    net = _load_network(cfg, node_ids)
    t_train = cfg.eval.t_train
    if t_train is None:
        raise ConfigError("scoring needs eval.t_train")
    if t_train >= counts.shape[1]:
        raise ConfigError(
            f"eval.t_train={t_train} leaves no test step in {counts.shape[1]} columns"
        )
    y_fit = counts[:, :t_train]
    samples, weights = _load_samples(args, len(node_ids))
    if weights is None:
        weights = np.full(samples.m, 1.0 / samples.m)
    preds = build_predictors(y_fit, net, cfg.model.mode, cfg.model.c)

    train_t = list(range(2, t_train + 1))
    train_rates = cell_predictive_rates(samples, preds, y_fit, train_t)
    train_obs = y_fit[:, 1:t_train]
    train_report = log_score(train_rates, weights, train_obs, train_t)

    v, x_last, y_last = horizon_inputs(y_fit, net, cfg.model.mode, cfg.model.c)
    test_rates = predictive_rates(samples, v, x_last, y_last)[:, :, None]
    test_obs = counts[:, t_train : t_train + 1]
    test_report = log_score(test_rates, weights, test_obs, [t_train + 1])

    point = test_rates[:, :, 0].T @ weights
    scaled, mase_mean, n_excluded = mase(point, counts[:, t_train].astype(float), y_fit)

    rng = np.random.default_rng(cfg.eval.pit_seed)
    pits = randomized_pit_cells(train_rates, weights, train_obs, rng)

    out_dir = _out_dir(args, cfg)
    write_json(
        out_dir / "scores.json",
        {
            "train": {
                "mean_log_score": train_report.mean_log_score,
                "t_set": list(train_report.t_set),
                "n_zero_mass": train_report.n_zero_mass,
            },
            "test": {
                "mean_log_score": test_report.mean_log_score,
                "t_set": list(test_report.t_set),
                "n_zero_mass": test_report.n_zero_mass,
            },
            "mase": {"mean": mase_mean, "n_excluded": n_excluded},
        },
    )
    write_table_csv(
        out_dir / "mase.csv",
        ["node", "scaled_error"],
        [
            [node, "" if np.isnan(val) else f"{val:.10g}"]
            for node, val in zip(node_ids, scaled)
        ],
    )
    write_table_csv(
        out_dir / "pit.csv",
        ["node", "t", "u"],
        [
            [node_ids[i], train_t[j], f"{pits[i, j]:.10g}"]
            for i in range(pits.shape[0])
            for j in range(pits.shape[1])
        ],
    )
    print(f"wrote scores.json, mase.csv, pit.csv to {out_dir}")
    return 0


def cmd_stack(args) -> int:
    cfg = load_config(args.config, args.overrides)
    node_ids, _, counts = _load_counts(cfg)
    net = _load_network(cfg, node_ids)
    t_train = cfg.eval.t_train
    if t_train is None:
        raise ConfigError("stacking needs eval.t_train")
    y_fit = counts[:, :t_train]
    window = cfg.eval.stacking_window
    t_val = [t for t in range(t_train - window + 1, t_train + 1) if t >= 2]
    if not t_val:
        raise ConfigError("stacking window contains no scoreable time steps")
    preds = build_predictors(y_fit, net, cfg.model.mode, cfg.model.c)
    chains = [read_draws_jsonl(path) for path in args.samples]
    for path, chain in zip(args.samples, chains):
        if chain.n != len(node_ids):
            raise ArtifactMismatchError(
                f"{path} has draws over {chain.n} nodes but the data has {len(node_ids)}"
            )
    obs = y_fit[:, [t - 1 for t in t_val]]
    pmf_matrix = np.empty((len(chains), obs.size))
    for c_idx, chain in enumerate(chains):
        rates = cell_predictive_rates(chain, preds, y_fit, t_val)
        uniform = np.full(chain.m, 1.0 / chain.m)
        cells = []
        for i in range(obs.shape[0]):
            for j in range(obs.shape[1]):
                cells.append(mixture_pmf(rates[:, i, j], uniform, np.asarray([obs[i, j]]))[0])
        pmf_matrix[c_idx] = cells
    weights = stacking_weights(pmf_matrix)
    out_dir = _out_dir(args, cfg)
    out = Path(args.out) if args.out else out_dir / "stack_weights.json"
    write_json(
        out,
        {
            "weights": [float(w) for w in weights],
            "objective": stacking_objective(weights, pmf_matrix),
            "validation_t": t_val,
            "samples": [str(s) for s in args.samples],
        },
    )
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
