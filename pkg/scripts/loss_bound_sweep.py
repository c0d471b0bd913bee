"""Loss bound tightness on random small factored MDPs.

For each instance, runs approximate policy iteration with symmetric Bellman
error bounds and compares the true loss of the final greedy policy (by
explicit enumeration) against 2 eps / (1 - gamma). Writes a CSV row per
instance when --csv is given.

    python3 scripts/loss_bound_sweep.py --instances 200 --seed 1 --csv sweep.csv
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import asdict, dataclass

import numpy as np

from factored_pi import RunConfig, run_policy_iteration
from factored_pi.generators import random_basis, random_model, random_weights
from factored_pi.oracle import basis_matrix, exact_policy_iteration, exact_policy_value, flatten, weights_vector


@dataclass
class Config:
    instances: int = 100
    seed: int = 0
    max_n: int = 6
    max_k: int = 5
    weights: str = "random"  # or "uniform"
    csv: str | None = None


@dataclass
class Row:
    instance: int
    n: int
    k: int
    gamma: float
    status: str
    iterations: int
    epsilon: float
    bound: float
    loss: float


def draw(rng, cfg: Config):
    while True:
        model = random_model(rng, max_n=cfg.max_n)
        basis = random_basis(rng, model, k=int(rng.integers(1, cfg.max_k + 1)))
        rho = random_weights(rng, model)
        flat = flatten(model)
        A, lam = basis_matrix(basis, flat.states), weights_vector(rho, flat.states)
        eig = np.linalg.eigvalsh(A.T @ (lam[:, None] * A))
        if eig[0] > 1e-9 * eig[-1]:
            return model, basis, rho, flat


def run(cfg: Config) -> list[Row]:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(cfg.instances):
        model, basis, rho, flat = draw(rng, cfg)
        weights = rho if cfg.weights == "random" else "uniform"
        trace = run_policy_iteration(model, basis, RunConfig(weights=weights, error_mode="symmetric"))
        if not trace.records or trace.records[-1].bellman is None:
            print(f"instance {i}: {trace.status} {trace.message}")
            continue
        rep = trace.records[-1].bellman
        _, v_star = exact_policy_iteration(flat)
        loss = float(np.abs(v_star - exact_policy_value(flat, trace.final_policy)).max())
        rows.append(
            Row(i, model.n, basis.k, model.gamma, trace.status, len(trace.records), rep.epsilon, rep.loss_bound, loss)
        )
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f, default in asdict(Config()).items():
        p.add_argument(f"--{f.replace('_', '-')}", type=type(default) if default is not None else str, default=default)
    cfg = Config(**vars(p.parse_args()))
    rows = run(cfg)
    violations = [r for r in rows if r.loss > r.bound + 1e-8]
    ratio = [r.loss / r.bound for r in rows if r.bound > 0]
    statuses = {s: sum(r.status == s for r in rows) for s in sorted({r.status for r in rows})}
    print(f"{len(rows)} runs {statuses}; bound violations: {len(violations)}")
    if ratio:
        print(f"loss / bound: median {np.median(ratio):.4f}, max {max(ratio):.4f}")
    if cfg.csv:
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(asdict(rows[0])))
            w.writeheader()
            w.writerows(asdict(r) for r in rows)


if __name__ == "__main__":
    main()
