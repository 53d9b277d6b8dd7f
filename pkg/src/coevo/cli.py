"""``coevo`` command line interface.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .analysis import expected_lambda_star, compute_d_star, theorem_check
from .dynamics import fmt
from .harness import (build_network, derive_seed, replicate_seed, simulate_replicate, sweep,
                      write_json, _COMMUNICATION, _DYNAMICS, _INFLUENCE)
from .netgen import TopologySpec, generate, is_connected, write_edgelist

log = logging.getLogger("coevo")

SEED_SCHEME = ("replicate seed = splitmix64 chain over (master_seed, replicate, bits(lambda), "
               "bits(mu)); layer and dynamics streams chain tags 1, 2, 3 onto it")


GLOBAL_DEFAULTS = {"seed": None, "out_dir": None, "threads": 1, "verbose": False}


def _parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand from resetting a flag given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master seed (overrides the config file)")
    common.add_argument("--out-dir", type=Path, default=argparse.SUPPRESS,
                        help="output directory (default: out)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker processes (default: 1)")
    common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="debug logging, per-run trajectories")

    p = argparse.ArgumentParser(prog="coevo", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate one network layer")
    g.add_argument("--family", required=True, choices=["rr", "er", "ws", "ba"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--p", type=float, default=0.0)
    g.add_argument("--out", type=Path, help="edge-list path (default: <out-dir>/network.edgelist)")

    for name, text in (("simulate", "one run with trajectory output"),
                       ("estimate-threshold", "lambda sweep and variance-peak estimate"),
                       ("sweep2d", "(lambda, mu) grid sweep"),
                       ("theory-check", "d*, lambda* and the exclusion condition")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("config", type=Path, help="YAML config file")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    for name, default in GLOBAL_DEFAULTS.items():
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        cfg = _load(args)
        out = args.out_dir or Path("out")
        out.mkdir(parents=True, exist_ok=True)
        handler = {"simulate": cmd_simulate, "estimate-threshold": cmd_estimate_threshold,
                   "sweep2d": cmd_sweep2d, "theory-check": cmd_theory_check}[args.command]
        return handler(cfg, out, max(1, args.threads))
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _load(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.verbose:
        overrides["verbose"] = True
    return cfgmod.load(args.config, overrides)


def _echo(cfg: dict, out: Path, derived: dict) -> None:
    echoed = dict(cfg)
    echoed["derived"] = derived
    cfgmod.dump(echoed, out / "config.resolved.yaml")


def cmd_generate(args) -> int:
    try:
        spec = TopologySpec(args.family, args.n, args.d, args.p)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    seed = 0 if args.seed is None else args.seed
    layer = generate(spec, np.random.default_rng(seed))
    path = args.out or (args.out_dir or Path("out")) / "network.edgelist"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_edgelist(layer, path)
    deg = layer.degrees
    print(f"n={layer.n} edges={layer.m} connected={is_connected(layer)} "
          f"degree min={deg.min()} mean={deg.mean():.6g} max={deg.max()}")
    return 0


def cmd_simulate(cfg: dict, out: Path, threads: int) -> int:
    sc = cfgmod.scenario(cfg)
    res, traj, net = simulate_replicate(sc, 0, every=cfg["snapshot_every"], record=True)
    traj.write_csv(out / "trajectory.csv")
    traj.write_final_csv(out / "final_state.csv")
    write_edgelist(net.influence, out / "influence.edgelist")
    write_edgelist(net.communication, out / "communication.edgelist")
    write_json({"avg_x": float(fmt(res.avg_x)), "avg_y": float(fmt(res.avg_y)),
                "regime": res.regime.value, "seed": res.seed, "steps": sc.steps},
               out / "result.json")
    if sc.innovator is not None:
        report = theorem_check(net, sc.innovator, sc.alpha, sc.lam)
        (out / "theory.json").write_text(report.to_json() + "\n")
    _echo(cfg, out, {
        "seed_scheme": SEED_SCHEME,
        "replicate_seed": res.seed,
        "influence_seed": derive_seed(res.seed, _INFLUENCE),
        "communication_seed": derive_seed(res.seed, _COMMUNICATION),
        "dynamics_seed": derive_seed(res.seed, _DYNAMICS),
        "network_attempts": list(res.network_attempts),
        "steps": sc.steps,
    })
    print(f"regime={res.regime.value} avg_x={fmt(res.avg_x)} avg_y={fmt(res.avg_y)}")
    return 0


def _run_sweep(cfg, out, threads, lambda_grid, mu_grid):
    sc = cfgmod.scenario(cfg)
    traj_dir = out / "trajectories" if cfg["verbose"] else None
    res = sweep(sc, lambda_grid, mu_grid, workers=threads, trajectory_dir=traj_dir)
    res.write_csv(out / "sweep.csv")
    _echo(cfg, out, {
        "seed_scheme": SEED_SCHEME,
        "first_replicate_seed": replicate_seed(sc.master_seed, 0, lambda_grid[0], mu_grid[0]),
        "steps": sc.steps,
    })
    return res


def cmd_estimate_threshold(cfg: dict, out: Path, threads: int) -> int:
    res = _run_sweep(cfg, out, threads, cfg["lambda_grid"], [cfg["mu"]])
    est = res.threshold_estimate()
    est.write_csv(out / "variance.csv")
    summary = res.summary()
    summary["lambda_hat"] = est.lambda_hat
    write_json(summary, out / "summary.json")
    print(f"lambda_hat={fmt(est.lambda_hat)}")
    return 0


def cmd_sweep2d(cfg: dict, out: Path, threads: int) -> int:
    res = _run_sweep(cfg, out, threads, cfg["lambda_grid"], cfg["mu_grid"])
    write_json(res.summary(), out / "summary.json")
    for lam, row in zip(res.lambda_grid, res.modal_grid()):
        print(f"lambda={fmt(lam)}: " + " ".join(r[:1] if r != "Undetermined" else "?" for r in row))
    return 0


def cmd_theory_check(cfg: dict, out: Path, threads: int) -> int:
    sc = cfgmod.scenario(cfg)
    if sc.innovator is None:
        raise cfgmod.ConfigError("innovator", "theory-check needs an innovator")
    seed = replicate_seed(sc.master_seed, 0, sc.lam, sc.mu)
    net, _ = build_network(sc, seed)
    report = json.loads(theorem_check(net, sc.innovator, sc.alpha, sc.lam).to_json())
    if cfg["theory_samples"] > 0:
        d_stars = [compute_d_star(build_network(sc, replicate_seed(sc.master_seed, k, sc.lam, sc.mu))[0],
                                  sc.innovator)
                   for k in range(cfg["theory_samples"])]
        report["expected_lambda_star"] = expected_lambda_star(d_stars, sc.alpha)
        report["theory_samples"] = cfg["theory_samples"]
    write_json(report, out / "theory.json")
    _echo(cfg, out, {"seed_scheme": SEED_SCHEME, "replicate_seed": seed})
    print(json.dumps(report, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
