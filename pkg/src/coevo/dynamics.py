"""Coupled opinion/action dynamics with asynchronous random activation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .netgen import TwoLayerNetwork

INF = math.inf
BLOCK = 1 << 16


def parse_beta(value) -> float:
    """Accept a number or the string ``"inf"``."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return INF
        value = float(value)
    value = float(value)
    if math.isnan(value) or value < 0:
        raise ValueError(f"beta must be >= 0 or 'inf', got {value!r}")
    return value


@dataclass(eq=False)
class AgentParams:
    mu: np.ndarray
    lam: np.ndarray
    beta: np.ndarray
    alpha: float

    def __post_init__(self):
        self.mu = np.array(self.mu, dtype=np.float64)
        self.lam = np.array(self.lam, dtype=np.float64)
        self.beta = np.array([parse_beta(b) for b in np.ravel(self.beta)], dtype=np.float64)
        self.alpha = float(self.alpha)
        if not (len(self.mu) == len(self.lam) == len(self.beta)):
            raise ValueError("mu, lam and beta must have the same length")
        for name in ("mu", "lam"):
            v = getattr(self, name)
            if ((v < 0) | (v > 1) | np.isnan(v)).any():
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")

    @classmethod
    def homogeneous(cls, n: int, mu: float, lam: float, beta, alpha: float) -> "AgentParams":
        return cls(np.full(n, mu), np.full(n, lam), np.full(n, parse_beta(beta)), alpha)

    def with_stubborn(self, s: int) -> "AgentParams":
        """Copy with agent ``s`` made stubborn (mu=0, lambda=1, beta=inf)."""
        mu, lam, beta = self.mu.copy(), self.lam.copy(), self.beta.copy()
        mu[s], lam[s], beta[s] = 0.0, 1.0, INF
        return AgentParams(mu, lam, beta, self.alpha)

    @property
    def n(self) -> int:
        return len(self.mu)


@dataclass(eq=False)
class PopulationState:
    x: np.ndarray
    y: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=np.int64)
        self.y = np.array(self.y, dtype=np.float64)
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same shape")
        if not np.isin(self.x, (-1, 1)).all():
            raise ValueError("actions must be -1 or +1")
        if (np.abs(self.y) > 1.0 + 1e-12).any():
            raise ValueError("opinions must lie in [-1, 1]")

    @property
    def n(self) -> int:
        return len(self.x)

    def copy(self) -> "PopulationState":
        return PopulationState(self.x.copy(), self.y.copy(), self.t)

    def others(self, i: int) -> np.ndarray:
        """Actions of everyone except ``i``."""
        return np.delete(self.x, i)

    def __eq__(self, other):
        if not isinstance(other, PopulationState):
            return NotImplemented
        return (self.t == other.t and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y))


@dataclass(frozen=True)
class StepTrace:
    activated: int
    y_before: float
    y_after: float
    x_before: int
    x_after: int
    p_plus: float


def _arrays(net: TwoLayerNetwork):
    a, w = net.influence, net.communication
    return a.indptr, a.indices, w.indptr, w.indices, w.weights


def _degree(net: TwoLayerNetwork, i: int) -> int:
    d = int(net.influence.indptr[i + 1] - net.influence.indptr[i])
    if d == 0:
        raise ValueError(f"agent {i} has no influence-layer neighbours")
    return d


def opinion_update(i: int, state: PopulationState, net: TwoLayerNetwork, params: AgentParams) -> float:
    _degree(net, i)
    return float(K.opinion_update(i, state.x, state.y, *_arrays(net), params.mu[i]))


def payoff(i: int, action: int, state: PopulationState, net: TwoLayerNetwork, params: AgentParams) -> float:
    d = _degree(net, i)
    xsum = K.action_sum(i, state.x, net.influence.indptr, net.influence.indices)
    plus, minus = K.payoffs(state.y[i], d, xsum, params.lam[i], params.alpha)
    if action == 1:
        return float(plus)
    if action == -1:
        return float(minus)
    raise ValueError(f"action must be +1 or -1, got {action}")


def action_prob(i: int, action: int, state: PopulationState, net: TwoLayerNetwork,
                params: AgentParams) -> float:
    """Probability that agent ``i`` picks ``action`` if activated now.

    Evaluated directly for the requested action, so small tail
    probabilities keep full relative precision.
    """
    gain = payoff(i, action, state, net, params) - payoff(i, -action, state, net, params)
    return float(K.choice_prob(gain, params.beta[i]))


def action_prob_plus(i: int, state: PopulationState, net: TwoLayerNetwork, params: AgentParams) -> float:
    return action_prob(i, 1, state, net, params)


def _check_runnable(net: TwoLayerNetwork, params: AgentParams, state: PopulationState):
    if not (net.n == params.n == state.n):
        raise ValueError(f"size mismatch: network {net.n}, params {params.n}, state {state.n}")
    lonely = net.influence.degrees == 0
    # only agents that never look at neighbours may be isolated on the influence layer
    needs = lonely & ((params.mu > 0) | (params.lam < 1))
    if needs.any():
        raise ValueError(f"agent {int(np.argmax(needs))} has no influence-layer neighbours")


def draw_uniforms(rng: np.random.Generator, steps: int) -> np.ndarray:
    return rng.random((steps, 2))


def step(state: PopulationState, net: TwoLayerNetwork, params: AgentParams,
         rng: np.random.Generator) -> tuple[PopulationState, StepTrace]:
    """One activation; returns the new state and an audit record."""
    _check_runnable(net, params, state)
    u = draw_uniforms(rng, 1)
    i = K.pick_node(u[0, 0], state.n)
    new = state.copy()
    p = K.apply_step(i, u[0, 1], new.x, new.y, *_arrays(net), params.mu, params.lam,
                     params.beta, params.alpha)
    new.t += 1
    trace = StepTrace(int(i), float(state.y[i]), float(new.y[i]), int(state.x[i]),
                      int(new.x[i]), float(p))
    return new, trace


@dataclass(eq=False)
class Trajectory:
    """Snapshots of ``(t, <x>, <y>)`` plus the final state."""

    t: np.ndarray
    avg_x: np.ndarray
    avg_y: np.ndarray
    final: PopulationState
    every: int = field(default=0)

    def rows(self):
        return zip(self.t.tolist(), self.avg_x.tolist(), self.avg_y.tolist())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "avg_x", "avg_y"])
            for t, ax, ay in self.rows():
                w.writerow([t, fmt(ax), fmt(ay)])

    def write_final_csv(self, path) -> None:
        write_state_csv(self.final, path)


def fmt(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"refusing to write non-finite value {v!r}")
    return f"{v:.9g}"


def write_state_csv(state: PopulationState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "x", "y"])
        for i in range(state.n):
            w.writerow([i, int(state.x[i]), fmt(float(state.y[i]))])


def run(initial: PopulationState, net: TwoLayerNetwork, params: AgentParams, horizon: int,
        rng: np.random.Generator, every: int | None = None, record: bool = True) -> Trajectory:
    """Apply ``horizon`` activations.

    With ``record`` the averages are stored at ``t = 0`` and every ``every``
    steps (default ``n``), and at the horizon if it is not on the cadence.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    _check_runnable(net, params, initial)
    n = initial.n
    every = n if every is None else int(every)
    if every <= 0:
        raise ValueError("snapshot cadence must be positive")
    x, y = initial.x.copy(), initial.y.copy()
    arrays = _arrays(net)
    t0 = initial.t

    if not record:
        done = 0
        while done < horizon:
            k = min(BLOCK, horizon - done)
            K.run_final(x, y, *arrays, params.mu, params.lam, params.beta, params.alpha,
                        draw_uniforms(rng, k))
            done += k
        final = PopulationState(x, y, t0 + horizon)
        return Trajectory(np.array([t0 + horizon]), np.array([x.mean()]),
                          np.array([y.mean()]), final, every)

    # cadence is relative to the start of this run
    slots = horizon // every + 2
    rec_t = np.zeros(slots, dtype=np.int64)
    rec_x = np.zeros(slots)
    rec_y = np.zeros(slots)
    rec_t[0], rec_x[0], rec_y[0] = 0, x.sum() / n, _seq_sum(y) / n
    pos = 1
    done = 0
    while done < horizon:
        k = min(BLOCK, horizon - done)
        pos = K.run_block(x, y, *arrays, params.mu, params.lam, params.beta, params.alpha,
                          draw_uniforms(rng, k), done, every, rec_t, rec_x, rec_y, pos)
        done += k
    if horizon % every:
        rec_t[pos], rec_x[pos], rec_y[pos] = horizon, x.sum() / n, _seq_sum(y) / n
        pos += 1
    final = PopulationState(x, y, t0 + horizon)
    return Trajectory(rec_t[:pos] + t0, rec_x[:pos], rec_y[:pos], final, every)


def _seq_sum(v: np.ndarray) -> float:
    # left-to-right like the kernel, so snapshots match whatever path wrote them
    s = 0.0
    for a in v.tolist():
        s += a
    return s
