"""Command line driver: train, observables, ed-sweep, diagnostics.

Every subcommand reads one JSON run config (--config PATH or a shipped
--preset NAME), writes its artifacts into an output directory (--out or the
config's "outputs" key) and exits 0 on success, 2 on a configuration
problem, 3 on a numerical failure. Given the same config and seed, all
tables and checkpoints are byte-identical across runs; summary.json is the
one exception since it records wall time.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import resources

from . import __version__
from .ansatz import init_params, load_checkpoint, save_checkpoint
from .errors import ConfigError, DomainError, NumericalError, SizeLimitError
from .estimators import estimate_observable, local_costs_batch
from .optimizer import run_optimization
from .oracle import (
    RECONSTRUCT_SITE_LIMIT,
    expectation,
    negativity,
    physicality_metrics,
    purity,
    reconstruct_density,
    steady_state_ed,
)
from .runconfig import RunConfig, load_config, parse_config, with_overrides
from .sampler import ChainConfig, gelman_rubin, run_chain, run_diagonal_chain

PRESETS = ("quick", "thorough")


def central_site(n: int) -> int:
    """The central site, or the left-of-center one when N is even."""
    return (n - 1) // 2


def named_observables(n: int) -> list:
    """The measurement menu: single operators on the central site, pair
    operators on the central bond."""
    i = central_site(n)
    rows = [("identity", ()), ("sigma_x", (i,)), ("sigma_z", (i,))]
    if n >= 2:
        rows += [("sigma_xx", (i, i + 1)), ("sigma_zz", (i, i + 1))]
    return rows


def _sites_label(sites) -> str:
    return "-".join(str(s) for s in sites)


def _resolved_sampler(cfg: RunConfig) -> ChainConfig:
    return replace(cfg.sampler, seed=cfg.seed)


def _load_params_for(cfg: RunConfig, checkpoint_path):
    params = load_checkpoint(checkpoint_path)
    if params.n_visible != cfg.model.n_sites or params.n_hidden != cfg.m_hidden:
        raise ConfigError(
            f"checkpoint holds (n={params.n_visible}, m={params.n_hidden}) but the config "
            f"expects (n={cfg.model.n_sites}, m={cfg.m_hidden})"
        )
    return params


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _train_single(cfg: RunConfig, model, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    params0 = init_params(model.n_sites, cfg.m_hidden, cfg.init_scale, seed=cfg.seed)
    tic = time.perf_counter()
    params, trace = run_optimization(model, params0, _resolved_sampler(cfg),
                                     cfg.optimizer, method=cfg.method)
    wall = time.perf_counter() - tic
    save_checkpoint(params, os.path.join(out_dir, "checkpoint.json"))
    trace.to_csv(os.path.join(out_dir, "trace.csv"))
    done = len(trace) > 0
    _write_json(os.path.join(out_dir, "summary.json"), {
        "variant": model.variant,
        "n_sites": model.n_sites,
        "coupling": model.coupling,
        "field": model.field,
        "gamma": model.gamma,
        "m_hidden": cfg.m_hidden,
        "method": cfg.method,
        "seed": cfg.seed,
        "steps": len(trace),
        "final_cost_abs_sq": trace.cost_abs_sq[-1] if done else None,
        "final_variance": trace.variance[-1] if done else None,
        "final_acceptance": trace.acceptance[-1] if done else None,
        "wall_time_s": wall,
    })


def cmd_train(cfg: RunConfig, out_dir: str, threads: int) -> None:
    if cfg.sweep_values is None:
        _train_single(cfg, cfg.model, out_dir)
        return
    for h in cfg.sweep_values:
        _train_single(cfg, replace(cfg.model, field=h), os.path.join(out_dir, f"h_{h!r}"))


def cmd_observables(cfg: RunConfig, checkpoint_path, out_dir: str) -> None:
    params = _load_params_for(cfg, checkpoint_path)
    model = cfg.model
    diag_cfg = ChainConfig(
        n_samples=cfg.obs_samples, n_chains=cfg.sampler.n_chains,
        burn_in=cfg.sampler.burn_in, thinning=cfg.sampler.thinning,
        seed=cfg.seed, warm_start=cfg.sampler.warm_start,
    )
    batch = run_diagonal_chain(params, model, diag_cfg)
    path = os.path.join(out_dir, "observables.csv")
    with open(path, "w") as fh:
        fh.write("operator,sites,value,stderr,imag_residual,n_samples,n_flagged\n")
        for name, sites in named_observables(model.n_sites):
            est = estimate_observable(params, model, batch, name, sites)
            fh.write(f"{name},{_sites_label(sites)},{est.value!r},{est.stderr!r},"
                     f"{est.imag_residual!r},{est.n_samples},{est.n_flagged}\n")


def _sweep_point(model, h):
    state = steady_state_ed(replace(model, field=h))
    obs = [expectation(state, name, sites) for name, sites in named_observables(model.n_sites)
           if name != "identity"]
    pur = purity(state)
    negs = [negativity(state, tuple(range(cut))) for cut in range(1, model.n_sites)]
    return obs, pur, negs


def cmd_ed_sweep(cfg: RunConfig, out_dir: str, threads: int) -> None:
    model = cfg.model
    n = model.n_sites
    if n < 2:
        raise ConfigError("ed-sweep needs at least 2 sites (bipartitions must be proper)")
    values = cfg.sweep_values if cfg.sweep_values is not None else (model.field,)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda h: _sweep_point(model, h), values))
    else:
        points = [_sweep_point(model, h) for h in values]

    i = central_site(n)
    obs_cols = [f"sigma_x_site{i}", f"sigma_z_site{i}",
                f"sigma_xx_bond{i}_{i + 1}", f"sigma_zz_bond{i}_{i + 1}"]
    path = os.path.join(out_dir, "ed_sweep.csv")
    with open(path, "w") as fh:
        # cut=k means subsystem A is sites 0..k-1
        fh.write("h,cut," + ",".join(obs_cols) + ",negativity,purity\n")
        for h, (obs, pur, negs) in zip(values, points):
            obs_txt = ",".join(repr(v) for v in obs)
            for cut, neg in enumerate(negs, start=1):
                fh.write(f"{h!r},{cut},{obs_txt},{neg!r},{pur!r}\n")


def cmd_diagnostics(cfg: RunConfig, checkpoint_path, out_dir: str) -> None:
    params = _load_params_for(cfg, checkpoint_path)
    model = cfg.model
    batch = run_chain(params, model, _resolved_sampler(cfg))
    costs, flagged = local_costs_batch(params, model, batch.configs)

    r_hat = None
    reason = None
    if cfg.sampler.n_chains < 2:
        reason = "needs at least 2 chains"
    elif cfg.sampler.n_samples < 2:
        reason = "needs chains of length at least 2"
    else:
        try:
            r_hat = gelman_rubin(batch.per_chain(costs.real))
        except NumericalError as exc:
            reason = str(exc)

    physicality = None
    if model.n_sites <= RECONSTRUCT_SITE_LIMIT:
        min_eig, imag_sum, defect = physicality_metrics(reconstruct_density(params))
        physicality = {
            "min_real_eigenvalue": min_eig,
            "sum_abs_imag_eigenvalues": imag_sum,
            "hermiticity_defect": defect,
        }

    _write_json(os.path.join(out_dir, "diagnostics.json"), {
        "r_hat": r_hat,
        "r_hat_statistic": "re_local_cost",
        "r_hat_unavailable_reason": reason,
        "acceptance_per_chain": [float(a) for a in batch.acceptance_per_chain],
        "n_samples": int(batch.n_samples),
        "n_flagged": int(flagged.sum()),
        "flagged_fraction": float(flagged.sum() / max(batch.n_samples, 1)),
        "physicality": physicality,
    })


def load_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("liouvmc").joinpath("presets", f"{name}.json").read_text()
    return parse_config(json.loads(text))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liouvmc",
        description="Variational Monte Carlo steady states of dissipative spin chains.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "train": ("optimize the ansatz and write checkpoint, trace and summary", False),
        "observables": ("estimate named observables from a checkpoint", True),
        "ed-sweep": ("exact-diagonalization sweep of observables, negativity, purity", False),
        "diagnostics": ("chain convergence and physicality report for a checkpoint", True),
    }
    for name, (help_text, needs_checkpoint) in specs.items():
        p = sub.add_parser(name, help=help_text)
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--config", help="path to a run-config JSON file")
        group.add_argument("--preset", help=f"shipped preset name ({', '.join(PRESETS)})")
        p.add_argument("--out", help="output directory (overrides the config's 'outputs')")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel sweep points for ed-sweep (default 1)")
        if needs_checkpoint:
            p.add_argument("--checkpoint", required=True, help="parameter checkpoint JSON")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else load_preset(args.preset)
        cfg = with_overrides(cfg, seed=args.seed, outputs=args.out)
        if cfg.outputs is None:
            raise ConfigError("no output directory: set 'outputs' in the config or pass --out")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        os.makedirs(cfg.outputs, exist_ok=True)
        if args.command == "train":
            cmd_train(cfg, cfg.outputs, args.threads)
        elif args.command == "observables":
            cmd_observables(cfg, args.checkpoint, cfg.outputs)
        elif args.command == "ed-sweep":
            cmd_ed_sweep(cfg, cfg.outputs, args.threads)
        else:
            cmd_diagnostics(cfg, args.checkpoint, cfg.outputs)
    except (ConfigError, DomainError, SizeLimitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
