"""Two-layer coevolutionary dynamics of opinions and actions."""
from ._jit import NUMBA_ENABLED
from .analysis import (RegimeLabel, TheoryReport, ThresholdEstimate, averages, best_response_threshold,
                       classify_regime, compute_d_star, estimate_lambda_hat, lambda_star, theorem_check)
from .dynamics import INF, AgentParams, PopulationState, StepTrace, Trajectory, run, step
from .harness import (ScenarioConfig, SweepResult, build_scenario, grid_sweep_2d, lambda_sweep,
                      run_replicates)
from .netgen import (CommunicationLayer, Family, InfluenceLayer, TopologySpec, TwoLayerNetwork,
                     build_random_walk_weights, generate, is_connected, make_stubborn)

__version__ = "0.1.0"
