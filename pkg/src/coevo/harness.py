"""Replicated Monte Carlo experiments over the innovation-adoption scenario."""
from __future__ import annotations

import csv
import json
import logging
import os
import struct
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .analysis import (DEFAULT_PLATEAU_BAND, RegimeLabel, ThresholdEstimate, adoption_fraction,
                       classify_regime, estimate_lambda_hat)
from .dynamics import AgentParams, PopulationState, Trajectory, fmt, parse_beta, run
from .netgen import (GenerationError, TopologySpec, TwoLayerNetwork, build_random_walk_weights,
                     generate, is_connected, make_stubborn)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
MAX_NETWORK_ATTEMPTS = 1000

# stream tags mixed into a replicate seed
_INFLUENCE, _COMMUNICATION, _DYNAMICS, _FROZEN = 1, 2, 3, 0x4E4554


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*keys: int) -> int:
    """Stable 64-bit hash of a sequence of integers."""
    h = 0
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


def _float_key(v: float) -> int:
    return struct.unpack("<q", struct.pack("<d", float(v) + 0.0))[0]


def replicate_seed(master_seed: int, replicate: int, lam: float = 0.0, mu: float = 0.0) -> int:
    """Seed of one replicate in the cell ``(lam, mu)``.

    Cells are keyed by their parameter values, so growing a grid never moves
    the streams of cells already in it.
    """
    return derive_seed(master_seed, replicate, _float_key(lam), _float_key(mu))


@dataclass(frozen=True)
class ScenarioConfig:
    influence: TopologySpec
    communication: TopologySpec
    alpha: float = 0.5
    beta: float = 20.0
    lam: float = 0.0
    mu: float = 0.0
    innovator: int | None = 0
    horizon: int | None = None
    master_seed: int = 0
    replicates: int = 1
    initial_opinion: float = -1.0
    freeze_network: bool = False
    plateau_band: float = DEFAULT_PLATEAU_BAND

    def __post_init__(self):
        if self.influence.n != self.communication.n:
            raise ValueError("both layers must have the same number of nodes")
        object.__setattr__(self, "beta", parse_beta(self.beta))
        if not 0 <= self.lam <= 1 or not 0 <= self.mu <= 1:
            raise ValueError("lam and mu must lie in [0, 1]")
        if self.innovator is not None and not 0 <= self.innovator < self.n:
            raise ValueError(f"innovator {self.innovator} out of range")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not -1 <= self.initial_opinion <= 1:
            raise ValueError("initial_opinion must lie in [-1, 1]")
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("horizon must be >= 0")

    @property
    def n(self) -> int:
        return self.influence.n

    @property
    def steps(self) -> int:
        return 4 * self.n ** 2 if self.horizon is None else self.horizon

    def cell(self, lam: float, mu: float) -> "ScenarioConfig":
        return replace(self, lam=float(lam), mu=float(mu))


def _influence_layer(spec: TopologySpec, seed: int):
    for attempt in range(MAX_NETWORK_ATTEMPTS):
        layer = generate(spec, np.random.default_rng(derive_seed(seed, attempt)))
        # every agent reads its neighbours' actions, so nobody may be isolated
        if (layer.degrees > 0).all():
            return layer, attempt
    raise GenerationError(f"no influence layer without isolated nodes in {MAX_NETWORK_ATTEMPTS} attempts")


def _communication_layer(spec: TopologySpec, seed: int):
    for attempt in range(MAX_NETWORK_ATTEMPTS):
        layer = generate(spec, np.random.default_rng(derive_seed(seed, attempt)))
        if is_connected(layer):
            return layer, attempt
    raise GenerationError(f"no connected communication layer in {MAX_NETWORK_ATTEMPTS} attempts")


def build_network(config: ScenarioConfig, seed: int) -> tuple[TwoLayerNetwork, tuple[int, int]]:
    """Both layers from independent sub-seeds; returns the retry counts too."""
    infl, a1 = _influence_layer(config.influence, derive_seed(seed, _INFLUENCE))
    comm, a2 = _communication_layer(config.communication, derive_seed(seed, _COMMUNICATION))
    if a1 or a2:
        log.debug("seed %d: network regenerated (influence %d, communication %d)", seed, a1, a2)
    weights = build_random_walk_weights(comm)
    if config.innovator is not None:
        weights = make_stubborn(weights, config.innovator)
    return TwoLayerNetwork(infl, weights), (a1, a2)


def initial_state(config: ScenarioConfig) -> PopulationState:
    n = config.n
    x = np.full(n, -1, dtype=np.int64)
    y = np.full(n, float(config.initial_opinion))
    if config.innovator is not None:
        x[config.innovator] = 1
        y[config.innovator] = 1.0
    return PopulationState(x, y, 0)


def agent_params(config: ScenarioConfig) -> AgentParams:
    params = AgentParams.homogeneous(config.n, config.mu, config.lam, config.beta, config.alpha)
    if config.innovator is not None:
        params = params.with_stubborn(config.innovator)
    return params


def network_seed(config: ScenarioConfig, seed: int) -> int:
    return derive_seed(config.master_seed, _FROZEN) if config.freeze_network else seed


def build_scenario(config: ScenarioConfig, seed: int | None = None):
    """Network, parameters and initial state for one replicate.

    ``seed`` defaults to the seed of replicate 0 of the config's cell.
    """
    if seed is None:
        seed = replicate_seed(config.master_seed, 0, config.lam, config.mu)
    net, _ = build_network(config, network_seed(config, seed))
    return net, agent_params(config), initial_state(config)


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    seed: int
    avg_x: float
    avg_y: float
    regime: RegimeLabel
    network_attempts: tuple[int, int] = (0, 0)


def simulate_replicate(config: ScenarioConfig, replicate: int, every: int | None = None,
                       record: bool = False) -> tuple[ReplicateResult, Trajectory, TwoLayerNetwork]:
    seed = replicate_seed(config.master_seed, replicate, config.lam, config.mu)
    net, attempts = build_network(config, network_seed(config, seed))
    traj = run(initial_state(config), net, agent_params(config), config.steps,
               np.random.default_rng(derive_seed(seed, _DYNAMICS)), every=every, record=record)
    ax = float(traj.final.x.mean())
    ay = float(traj.final.y.mean())
    res = ReplicateResult(replicate, seed, ax, ay, classify_regime(ax, ay, config.plateau_band), attempts)
    return res, traj, net


def _task(args):
    config, replicate, traj_path, every = args
    res, traj, _ = simulate_replicate(config, replicate, every=every, record=traj_path is not None)
    if traj_path is not None:
        traj.write_csv(traj_path)
    return res


def _execute(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    _kernels.warmup()
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so output order never depends on scheduling
        return list(pool.map(_task, tasks, chunksize=chunk))


def run_replicates(config: ScenarioConfig, count: int | None = None, workers: int = 1,
                   trajectory_dir=None, every: int | None = None) -> list[ReplicateResult]:
    count = config.replicates if count is None else count
    if count < 1:
        raise ValueError("count must be >= 1")
    tasks = [(config, r, _traj_path(trajectory_dir, config, r), every) for r in range(count)]
    return _execute(tasks, workers)


def _traj_path(trajectory_dir, config, replicate):
    if trajectory_dir is None:
        return None
    Path(trajectory_dir).mkdir(parents=True, exist_ok=True)
    return str(Path(trajectory_dir) / f"traj_lam{config.lam:.6g}_mu{config.mu:.6g}_r{replicate}.csv")


@dataclass(eq=False)
class SweepResult:
    """Replicated outcomes over a ``(lambda, mu)`` grid.

    Arrays are indexed ``[lambda_index, mu_index, replicate]``.
    """

    lambda_grid: np.ndarray
    mu_grid: np.ndarray
    seeds: np.ndarray
    avg_x: np.ndarray
    avg_y: np.ndarray
    regimes: np.ndarray
    plateau_band: float = DEFAULT_PLATEAU_BAND
    meta: dict = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return self.avg_x.shape[2]

    @property
    def mean_x(self) -> np.ndarray:
        return self.avg_x.mean(axis=2)

    @property
    def mean_y(self) -> np.ndarray:
        return self.avg_y.mean(axis=2)

    @property
    def adoption(self) -> np.ndarray:
        return adoption_fraction(self.avg_x)

    def modal_regime(self, li: int, mi: int) -> RegimeLabel:
        counts = Counter(self.regimes[li, mi])
        order = list(RegimeLabel)
        return max(order, key=lambda r: (counts.get(r, 0), -order.index(r)))

    def modal_grid(self) -> list[list[str]]:
        return [[self.modal_regime(li, mi).value for mi in range(len(self.mu_grid))]
                for li in range(len(self.lambda_grid))]

    def regime_share(self, li: int, mi: int, label: RegimeLabel) -> float:
        # elementwise == on an object array against a str enum is unreliable
        return float(np.mean([r is label for r in self.regimes[li, mi]]))

    def threshold_estimate(self, mi: int = 0) -> ThresholdEstimate:
        return estimate_lambda_hat(self.lambda_grid, self.adoption[:, mi, :])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "mu", "replicate", "seed", "avg_x", "avg_y", "regime"])
            for li, lam in enumerate(self.lambda_grid):
                for mi, mu in enumerate(self.mu_grid):
                    for r in range(self.replicates):
                        w.writerow([fmt(float(lam)), fmt(float(mu)), r, int(self.seeds[li, mi, r]),
                                    fmt(float(self.avg_x[li, mi, r])),
                                    fmt(float(self.avg_y[li, mi, r])),
                                    self.regimes[li, mi, r].value])

    def summary(self) -> dict:
        cells = []
        for li, lam in enumerate(self.lambda_grid):
            for mi, mu in enumerate(self.mu_grid):
                frac = self.adoption[li, mi]
                counts = Counter(r.value for r in self.regimes[li, mi])
                cells.append({
                    "lambda": _round9(lam), "mu": _round9(mu),
                    "mean_x": _round9(self.mean_x[li, mi]),
                    "mean_y": _round9(self.mean_y[li, mi]),
                    "adoption_variance": _round9(frac.var(ddof=1)) if len(frac) > 1 else 0.0,
                    "modal_regime": self.modal_regime(li, mi).value,
                    "regime_counts": dict(sorted(counts.items())),
                })
        out = {
            "lambda_grid": [_round9(v) for v in self.lambda_grid],
            "mu_grid": [_round9(v) for v in self.mu_grid],
            "replicates": self.replicates,
            "cells": cells,
            "modal_regimes": self.modal_grid(),
        }
        out.update(self.meta)
        return out


def _round9(v) -> float:
    return float(fmt(float(v)))


def sweep(config: ScenarioConfig, lambda_grid, mu_grid, workers: int = 1,
          trajectory_dir=None) -> SweepResult:
    lambda_grid = np.asarray(lambda_grid, dtype=np.float64).ravel()
    mu_grid = np.asarray(mu_grid, dtype=np.float64).ravel()
    if lambda_grid.size == 0 or mu_grid.size == 0:
        raise ValueError("grids must be nonempty")
    reps = config.replicates
    tasks = []
    for lam in lambda_grid:
        for mu in mu_grid:
            cell = config.cell(lam, mu)
            tasks.extend((cell, r, _traj_path(trajectory_dir, cell, r), None) for r in range(reps))
    results = _execute(tasks, workers)
    shape = (lambda_grid.size, mu_grid.size, reps)
    seeds = np.array([r.seed for r in results], dtype=np.uint64).reshape(shape)
    ax = np.array([r.avg_x for r in results]).reshape(shape)
    ay = np.array([r.avg_y for r in results]).reshape(shape)
    regimes = np.empty(len(results), dtype=object)
    regimes[:] = [r.regime for r in results]
    return SweepResult(lambda_grid, mu_grid, seeds, ax, ay, regimes.reshape(shape), config.plateau_band)


def lambda_sweep(config: ScenarioConfig, lambda_grid, workers: int = 1) -> ThresholdEstimate:
    return sweep(config, lambda_grid, [config.mu], workers).threshold_estimate()


def grid_sweep_2d(config: ScenarioConfig, lambda_grid, mu_grid, workers: int = 1,
                  trajectory_dir=None) -> SweepResult:
    return sweep(config, lambda_grid, mu_grid, workers, trajectory_dir)


def default_lambda_grid(step: float = 0.02, stop: float = 0.6) -> np.ndarray:
    k = int(round(stop / step))
    return np.round(np.arange(k + 1) * step, 10)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def config_to_dict(config: ScenarioConfig) -> dict:
    d = asdict(config)
    for key in ("influence", "communication"):
        spec = getattr(config, key)
        d[key] = {"family": spec.family.value, "n": spec.n, "d": spec.d, "p": spec.p}
    d["beta"] = "inf" if np.isinf(config.beta) else config.beta
    return d


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
