"""Compare the compiled and pure-numpy kernel backends on one workload.

Runs itself twice as a subprocess, once per ``CYBERMDP_BACKEND`` setting,
because the backend is chosen at import time.  Each child builds the
realistic-scale generated network, then times value iteration, a block of
tabular training episodes, and a batch of greedy rollouts, after a warmup
pass so compilation cost is reported separately rather than folded in.

Usage: python3 benchmarks/bench_kernels.py [--episodes N] [--rollouts N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

SRC = Path(__file__).resolve().parent.parent / "src"


def child(episodes: int, rollouts: int) -> None:
    sys.path.insert(0, str(SRC))
    import numpy as np

    from cybermdp._kernels import BACKEND
    from cybermdp.evaluate import rollout_greedy
    from cybermdp.mdp import build_cvss_mdp, value_iteration
    from cybermdp.netgen import ENTERPRISE_SCALE, TopologyParams, generate
    from cybermdp.solver import TrainConfig, train

    t0 = time.perf_counter()
    tiny = build_cvss_mdp(generate(TopologyParams(1, 3, 0.5, 1, 0.0, seed=1)))
    value_iteration(tiny)
    warm = train(tiny, TrainConfig(episodes=2, eval_interval=1))
    rollout_greedy(tiny, warm.q, np.random.default_rng(0), 50)
    warmup = time.perf_counter() - t0

    mdp = build_cvss_mdp(generate(ENTERPRISE_SCALE))

    t0 = time.perf_counter()
    value_iteration(mdp)
    vi = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = train(
        mdp,
        TrainConfig(episodes=episodes, eval_interval=max(1, episodes // 10), seed=0),
    )
    training = time.perf_counter() - t0

    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    for _ in range(rollouts):
        rollout_greedy(mdp, result.q, rng, 2500)
    rollout = time.perf_counter() - t0

    print(json.dumps({
        "backend": BACKEND,
        "states": mdp.num_states,
        "warmup_s": warmup,
        "value_iteration_s": vi,
        "training_s": training,
        "rollouts_s": rollout,
    }))


def run_child(backend: str, episodes: int, rollouts: int) -> dict:
    env = dict(os.environ, CYBERMDP_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, __file__, "--as-child",
         "--episodes", str(episodes), "--rollouts", str(rollouts)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--episodes", type=int, default=2000)
    parser.add_argument("--rollouts", type=int, default=200)
    parser.add_argument("--as-child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.as_child:
        child(args.episodes, args.rollouts)
        return 0

    rows = []
    for backend in ("numba", "numpy"):
        try:
            rows.append(run_child(backend, args.episodes, args.rollouts))
        except subprocess.CalledProcessError as err:
            print(f"{backend} child failed:\n{err.stderr}", file=sys.stderr)
            return 1

    compiled, fallback = rows
    print(f"workload: {compiled['states']}-state process, "
          f"{args.episodes} training episodes, {args.rollouts} greedy rollouts\n")
    header = f"{'phase':<18}{'numba':>12}{'numpy':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for key, label in [
        ("warmup_s", "warmup (compile)"),
        ("value_iteration_s", "value iteration"),
        ("training_s", "training"),
        ("rollouts_s", "greedy rollouts"),
    ]:
        ratio = fallback[key] / compiled[key] if compiled[key] > 0 else float("inf")
        print(f"{label:<18}{compiled[key]:>11.3f}s{fallback[key]:>11.3f}s{ratio:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
