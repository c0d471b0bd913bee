"""Stationary vs uniform weighting on the four-state chain.

Scans discount factors and boundary conventions, printing the induced policy
sequence of approximate policy iteration under both weightings, the exact
optimum, and the stationary distribution of RRRR.

    python3 scripts/chain4_counterexample.py --gammas 0.8 0.9 0.95 0.99
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field

import numpy as np

from factored_pi import RunConfig, run_policy_iteration
from factored_pi.demos import BOUNDARIES, chain4
from factored_pi.oracle import exact_policy_iteration, flatten, policy_string, stationary_distribution

REFERENCE = np.array([0.00113, 0.01096, 0.09913, 0.88879])


@dataclass
class Config:
    gammas: list[float] = field(default_factory=lambda: [0.8, 0.9, 0.95, 0.99])
    boundaries: list[str] = field(default_factory=lambda: list(BOUNDARIES))
    max_iterations: int = 50


def sequence(trace, flat) -> str:
    seq = [policy_string(flat, r.policy) for r in trace.records] + [policy_string(flat, trace.final_policy)]
    seq = [p for i, p in enumerate(seq) if i == 0 or p != seq[i - 1]]
    tail = f", cycle {trace.cycle_length}" if trace.cycle_length else ""
    return f"{' -> '.join(seq)} [{trace.status}{tail}]"


def run(cfg: Config):
    for boundary in cfg.boundaries:
        flat = flatten(chain4(boundary=boundary).model)
        rho = stationary_distribution(flat, "R")
        dev = np.abs(rho - REFERENCE).max()
        print(f"== boundary {boundary}: stationary(RRRR) = {np.array2string(rho, precision=5)}  max dev {dev:.5f}")
        for gamma in cfg.gammas:
            demo = chain4(gamma, boundary)
            flat = flatten(demo.model)
            exact, _ = exact_policy_iteration(flat)
            print(f"  gamma {gamma}: exact {''.join(exact)}")
            for mode in ("stationary", "uniform"):
                config = RunConfig(weights=mode, start_action="R", max_iterations=cfg.max_iterations)
                print(f"    {mode:10s} {sequence(run_policy_iteration(demo.model, demo.basis, config), flat)}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--gammas", type=float, nargs="+", default=Config().gammas)
    p.add_argument("--boundaries", nargs="+", choices=BOUNDARIES, default=list(BOUNDARIES))
    p.add_argument("--max-iterations", type=int, default=50)
    a = p.parse_args()
    run(Config(a.gammas, a.boundaries, a.max_iterations))


if __name__ == "__main__":
    main()
