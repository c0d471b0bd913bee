"""Approximate policy iteration over factored value functions.

Each iteration solves the projected fixed point for the current decision
list (the start policy is a single fixed action), extracts the greedy
decision list, and stops when the list repeats: immediately (converged) or
after a detour through earlier lists (oscillating).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .bounds import ErrorReport, bellman_error_greedy, bellman_error_policy, boost_witness
from .elimination import MAX_WIDTH
from .listgram import solve_decision_list_policy
from .model import (
    Basis,
    FactoredMDP,
    FactoredWeights,
    single_cluster_weights,
    uniform_weights,
)
from .oracle import STATE_CAP, flatten, stationary_distribution
from .policy import DecisionListPolicy, catch_all, extract_decision_list
from .value import Solution, evaluate_fixed_action

CONVERGED = "converged"
OSCILLATING = "oscillating"
MAX_ITERATIONS = "max_iterations"
FAILED = "error"


@dataclass(frozen=True)
class RunConfig:
    max_iterations: int = 50
    # "uniform", "stationary" (explicit-state, small models only) or fixed weights
    weights: Literal["uniform", "stationary"] | FactoredWeights = "uniform"
    prune: bool | None = None
    error_mode: Literal["one-sided", "symmetric"] | None = None
    refine_rounds: int = 0
    refine_eta: float = 0.5
    refine_tol: float = 1e-9
    start_action: str | None = None
    # The solver is deterministic; the seed is only carried into reports.
    seed: int = 0
    max_width: int = MAX_WIDTH
    oracle_cap: int = STATE_CAP

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class IterationRecord:
    index: int
    policy: DecisionListPolicy
    solution: Solution
    greedy: DecisionListPolicy
    bellman: ErrorReport | None = None
    policy_error: ErrorReport | None = None
    wall_time: float = 0.0

    @property
    def w(self) -> np.ndarray:
        return self.solution.w


@dataclass
class RefinementRecord:
    round: int
    weights: FactoredWeights
    solution: Solution
    error: ErrorReport


@dataclass
class RunTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: str = MAX_ITERATIONS
    cycle_length: int | None = None
    message: str = ""
    refinements: list[RefinementRecord] = field(default_factory=list)

    @property
    def final_policy(self) -> DecisionListPolicy | None:
        return self.records[-1].greedy if self.records else None

    @property
    def final_coefficients(self) -> np.ndarray | None:
        return self.records[-1].w if self.records else None


def resolve_weights(model: FactoredMDP, config: RunConfig, policy: DecisionListPolicy) -> FactoredWeights:
    if isinstance(config.weights, FactoredWeights):
        return config.weights
    if config.weights == "uniform":
        return uniform_weights(model)
    if config.weights == "stationary":
        flat = flatten(model, config.oracle_cap)
        return single_cluster_weights(model, stationary_distribution(flat, policy))
    raise ValueError(f"unknown weight mode {config.weights!r}")


def is_fixed_action(policy: DecisionListPolicy) -> bool:
    return policy.fallback is None and len(policy) == 1 and not policy.conditionals[0].t.scope


def evaluate_policy(
    model: FactoredMDP,
    basis: Basis,
    rho: FactoredWeights,
    policy: DecisionListPolicy,
    max_width: int = MAX_WIDTH,
) -> Solution:
    """Fixed-action path for a single catch-all policy, decision-list path otherwise."""
    if is_fixed_action(policy):
        return evaluate_fixed_action(model, basis, rho, policy.conditionals[0].action)
    return solve_decision_list_policy(model, basis, rho, policy, max_width)


def run_policy_iteration(model: FactoredMDP, basis: Basis, config: RunConfig = RunConfig()) -> RunTrace:
    trace = RunTrace()
    start = config.start_action or model.actions[0].id
    policy = catch_all(start)
    seen: list[tuple] = []
    symmetric = config.error_mode == "symmetric"
    try:
        for it in range(1, config.max_iterations + 1):
            t0 = time.perf_counter()
            rho = resolve_weights(model, config, policy)
            sol = evaluate_policy(model, basis, rho, policy, config.max_width)
            fitted = basis.with_coefficients(sol.w)
            greedy = extract_decision_list(model, fitted, config.prune)
            rec = IterationRecord(it, policy, sol, greedy)
            if config.error_mode is not None:
                rec.bellman = bellman_error_greedy(model, fitted, symmetric, config.max_width)
                rec.policy_error = bellman_error_policy(model, fitted, policy, symmetric, config.max_width)
            rec.wall_time = time.perf_counter() - t0
            trace.records.append(rec)
            seen.append(policy.key())
            key = greedy.key()
            if key == policy.key():
                trace.status = CONVERGED
                break
            if key in seen:
                trace.status = OSCILLATING
                trace.cycle_length = len(seen) - seen.index(key)
                break
            policy = greedy
        else:
            trace.status = MAX_ITERATIONS
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        trace.status = FAILED
        trace.message = f"{type(exc).__name__}: {exc}"
    if config.refine_rounds and trace.status != FAILED:
        _, trace = refine_weights(model, basis, config, trace)
    return trace


def refine_weights(
    model: FactoredMDP, basis: Basis, config: RunConfig, trace: RunTrace
) -> tuple[FactoredWeights, RunTrace]:
    """Re-weight toward the worst-fit state, re-solving each round.

    Evaluates the last policy of ``trace`` under the configured weights
    (record 0). Each round then scales the policy-error witness's entry in
    every cluster marginal by (1 + eta), renormalizes, and re-solves. Stops
    early once the error is within ``refine_tol``.
    """
    policy = trace.records[-1].policy
    rho = resolve_weights(model, config, policy)
    symmetric = config.error_mode != "one-sided"

    def solve(r, weights):
        sol = evaluate_policy(model, basis, weights, policy, config.max_width)
        report = bellman_error_policy(model, basis.with_coefficients(sol.w), policy, symmetric, config.max_width)
        trace.refinements.append(RefinementRecord(r, weights, sol, report))
        return report

    report = solve(0, rho)
    for r in range(1, config.refine_rounds + 1):
        if report.epsilon <= config.refine_tol:
            break
        rho = boost_witness(rho, report.witness, config.refine_eta)
        report = solve(r, rho)
    return rho, trace


def with_weights(config: RunConfig, weights) -> RunConfig:
    return replace(config, weights=weights)
