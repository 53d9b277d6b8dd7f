"""Compiled versus interpreted dynamics kernels.

Runs the same full-size replicate (n=200, RR layers 8/4) under numba and,
in a child process with COEVO_DISABLE_NUMBA=1, as plain Python, checks the
final states agree bit for bit and prints steps per second for both.

    python benchmarks/bench_kernels.py [--steps 160000] [--fallback-steps 20000]
"""
import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

CHILD = "--child"


def measure(steps: int) -> dict:
    import numpy as np

    from coevo import NUMBA_ENABLED, _kernels
    from coevo.dynamics import run
    from coevo.harness import ScenarioConfig, build_scenario, derive_seed
    from coevo.netgen import TopologySpec

    _kernels.warmup()
    cfg = ScenarioConfig(TopologySpec("rr", 200, 8), TopologySpec("rr", 200, 4),
                         lam=0.2, mu=0.005, horizon=steps, master_seed=1)
    net, params, state = build_scenario(cfg)
    t0 = time.perf_counter()
    traj = run(state, net, params, steps, np.random.default_rng(derive_seed(1, 3)), record=False)
    dt = time.perf_counter() - t0
    digest = hashlib.sha256(traj.final.x.tobytes() + traj.final.y.tobytes()).hexdigest()
    return {"numba": NUMBA_ENABLED, "steps": steps, "seconds": dt, "digest": digest}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=160_000)
    ap.add_argument("--fallback-steps", type=int, default=20_000)
    ap.add_argument(CHILD, type=int, help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child is not None:
        print(json.dumps(measure(args.child)))
        return

    def child(steps, disable):
        env = dict(os.environ)
        env.pop("COEVO_DISABLE_NUMBA", None)
        if disable:
            env["COEVO_DISABLE_NUMBA"] = "1"
        out = subprocess.run([sys.executable, __file__, CHILD, str(steps)], env=env,
                             capture_output=True, text=True, check=True)
        return json.loads(out.stdout)

    fast = child(args.steps, False)
    fast_short = child(args.fallback_steps, False)
    slow = child(args.fallback_steps, True)
    assert fast["numba"] and not slow["numba"]
    same = fast_short["digest"] == slow["digest"]
    rate_fast = fast["steps"] / fast["seconds"]
    rate_slow = slow["steps"] / slow["seconds"]
    print(f"numba       {rate_fast:14,.0f} steps/s  ({fast['steps']} steps)")
    print(f"interpreted {rate_slow:14,.0f} steps/s  ({slow['steps']} steps)")
    print(f"speedup     {rate_fast / rate_slow:14,.1f}x")
    print(f"identical final state over {slow['steps']} steps: {same}")
    if not same:
        sys.exit(1)


if __name__ == "__main__":
    main()
