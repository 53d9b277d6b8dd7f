"""Closed-form checks and empirical classification of outcomes."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import PopulationState, fmt
from .netgen import TwoLayerNetwork


class RegimeLabel(str, enum.Enum):
    PARADIGM_SHIFT = "ParadigmShift"
    UNPOPULAR_NORM = "UnpopularNorm"
    POPULAR_DISADVANTAGEOUS_NORM = "PopularDisadvantageousNorm"
    UNDETERMINED = "Undetermined"


DEFAULT_PLATEAU_BAND = 0.2


def averages(state: PopulationState) -> tuple[float, float]:
    return float(state.x.mean()), float(state.y.mean())


def best_response_threshold(lambda_i: float, y_i: float, alpha: float) -> float:
    """Neighbour action average above which +1 is the strict best response."""
    if not 0.0 <= lambda_i < 1.0:
        raise ValueError(f"threshold needs 0 <= lambda < 1, got {lambda_i}")
    return -(alpha + 2.0 * lambda_i / (1.0 - lambda_i) * y_i) / (2.0 + alpha)


def compute_d_star(net: TwoLayerNetwork, s: int) -> int:
    """Smallest influence-layer degree among the innovator's neighbours."""
    layer = net.influence if isinstance(net, TwoLayerNetwork) else net
    nbrs = layer.neighbors(s)
    if len(nbrs) == 0:
        raise ValueError(f"innovator {s} has no influence-layer neighbours")
    return int(layer.degrees[nbrs].min())


def lambda_star(d_star: int, alpha: float) -> float | None:
    """Commitment level below which full rationality rules out a paradigm shift.

    ``None`` when ``alpha >= d_star - 2`` and no such level exists.
    """
    if not alpha < d_star - 2:
        return None
    return 0.5 - (2.0 + alpha) / (4.0 * d_star - 4.0 - 2.0 * alpha)


@dataclass(frozen=True)
class TheoryReport:
    d_star: int
    lambda_star: float | None
    condition_alpha_ok: bool
    paradigm_shift_excluded: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def theorem_check(net: TwoLayerNetwork, s: int, alpha: float, lam: float) -> TheoryReport:
    d = compute_d_star(net, s)
    ls = lambda_star(d, alpha)
    ok = ls is not None
    return TheoryReport(d, ls, ok, ok and lam < ls)


def classify_regime(avg_x: float, avg_y: float, plateau_band: float = DEFAULT_PLATEAU_BAND) -> RegimeLabel:
    if not 0.0 < plateau_band < 1.0:
        raise ValueError(f"plateau band must lie in (0, 1), got {plateau_band}")
    if avg_x >= 1.0 - plateau_band and avg_y > 0:
        return RegimeLabel.PARADIGM_SHIFT
    if avg_x <= -1.0 + plateau_band:
        if avg_y > 0:
            return RegimeLabel.UNPOPULAR_NORM
        if avg_y < 0:
            return RegimeLabel.POPULAR_DISADVANTAGEOUS_NORM
    return RegimeLabel.UNDETERMINED


@dataclass(eq=False)
class ThresholdEstimate:
    grid: np.ndarray
    adoption_fraction: np.ndarray  # shape (len(grid), replicates)
    variance: np.ndarray
    lambda_hat: float

    @property
    def mean_fraction(self) -> np.ndarray:
        return self.adoption_fraction.mean(axis=1)

    def to_dict(self) -> dict:
        return {
            "lambda_hat": float(self.lambda_hat),
            "grid": [float(v) for v in self.grid],
            "variance": [float(v) for v in self.variance],
            "mean_fraction": [float(v) for v in self.mean_fraction],
            "replicates": int(self.adoption_fraction.shape[1]),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "variance", "mean_fraction"])
            for lam, var, mean in zip(self.grid, self.variance, self.mean_fraction):
                w.writerow([fmt(float(lam)), fmt(float(var)), fmt(float(mean))])


def adoption_fraction(avg_x: float) -> float:
    return (avg_x + 1.0) / 2.0


def estimate_lambda_hat(grid, fractions) -> ThresholdEstimate:
    """Variance peak of final adoption fractions over replicates.

    ``fractions[k, r]`` is replicate ``r`` at ``grid[k]``. Exact variance ties
    go to the smallest grid value.
    """
    grid = np.asarray(grid, dtype=np.float64)
    fractions = np.asarray(fractions, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if fractions.ndim != 2 or fractions.shape[0] != grid.size:
        raise ValueError(f"fractions must have shape ({grid.size}, replicates)")
    if fractions.shape[1] < 2:
        raise ValueError("need at least 2 replicates per grid point")
    var = fractions.var(axis=1, ddof=1)
    best = var.max()
    lam_hat = grid[var == best].min()
    return ThresholdEstimate(grid, fractions, var, float(lam_hat))


def expected_lambda_star(d_stars, alpha: float) -> float:
    """Mean of ``lambda_star`` over sampled ``d*`` values.

    Realisations where the bound does not apply contribute 0: nothing then
    stops the innovation for any commitment level.
    """
    vals = [lambda_star(int(d), alpha) for d in d_stars]
    return float(np.mean([0.0 if v is None else v for v in vals]))

