"""Explicit-state reference computations for small factored MDPs.

Everything here enumerates the full state space (mixed-radix order, last
variable fastest) and builds dense N x N matrices, so it is only meant for
tests, demos, and cross-checks. Policies are given per state as a sequence
of action ids, or as a decision list that is applied to every state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse.csgraph

from .model import Basis, Factor, FactoredMDP, FactoredWeights, action_cpds
from .policy import DecisionListPolicy, apply_policy
from .value import GramSystem

STATE_CAP = 2**12
TIE_TOL = 1e-12


class StateSpaceTooLarge(ValueError):
    pass


class NonUniqueStationary(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FlatMDP:
    cards: tuple[int, ...]
    states: np.ndarray  # N x n, row s is the assignment with index s
    actions: tuple[str, ...]  # tie-break priority order
    P: dict[str, np.ndarray]
    R: np.ndarray
    gamma: float

    @property
    def N(self) -> int:
        return self.R.size


def enumerate_states(cards: Sequence[int], cap: int = STATE_CAP) -> np.ndarray:
    N = 1
    for c in cards:
        N *= c
    if N > cap:
        raise StateSpaceTooLarge(f"{N} states exceeds the oracle cap of {cap}")
    if not cards:
        return np.zeros((1, 0), dtype=int)
    grids = np.meshgrid(*[np.arange(c) for c in cards], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def factor_vector(f: Factor, states: np.ndarray) -> np.ndarray:
    return f.values[tuple(states[:, v] for v in f.scope)] * np.ones(len(states))


def basis_matrix(basis: Basis, states: np.ndarray) -> np.ndarray:
    return np.stack([factor_vector(h, states) for h in basis.functions], axis=1)


def weights_vector(rho: FactoredWeights, states: np.ndarray) -> np.ndarray:
    out = np.ones(len(states))
    for marg in rho.clusters:
        out = out * factor_vector(marg, states)
    return out


def transition_matrix(model: FactoredMDP, action: str | None, states: np.ndarray) -> np.ndarray:
    """P[s, s'] for one action (None: the default model), as a product of CPDs."""
    cpds = model.default if action is None else action_cpds(model, action)
    N = len(states)
    P = np.ones((N, N))
    for i, cpd in enumerate(cpds):
        rows = cpd.values[tuple(states[:, p] for p in cpd.parents)]
        if rows.ndim == 1:
            rows = np.broadcast_to(rows, (N, rows.size))
        P *= rows[:, states[:, i]]
    return P


def flatten(model: FactoredMDP, cap: int = STATE_CAP) -> FlatMDP:
    states = enumerate_states(model.cards, cap)
    actions = model.executable_actions()
    P = {a: transition_matrix(model, a, states) for a in actions}
    R = np.zeros(len(states))
    for r in model.rewards:
        R = R + factor_vector(r, states)
    return FlatMDP(model.cards, states, actions, P, R, model.gamma)


def policy_actions(flat: FlatMDP, policy) -> list[str]:
    """Per-state actions from a decision list, a single action id, or a sequence."""
    if isinstance(policy, DecisionListPolicy):
        return [apply_policy(policy, tuple(s)) for s in flat.states]
    if isinstance(policy, str):
        return [policy] * flat.N
    actions = list(policy)
    if len(actions) != flat.N:
        raise ValueError(f"policy covers {len(actions)} states, model has {flat.N}")
    return actions


def policy_matrix(flat: FlatMDP, policy) -> np.ndarray:
    acts = policy_actions(flat, policy)
    return np.stack([flat.P[a][s] for s, a in enumerate(acts)])


def exact_policy_value(flat: FlatMDP, policy) -> np.ndarray:
    P = policy_matrix(flat, policy)
    return np.linalg.solve(np.eye(flat.N) - flat.gamma * P, flat.R)


def q_values(flat: FlatMDP, V: np.ndarray) -> dict[str, np.ndarray]:
    return {a: flat.R + flat.gamma * flat.P[a] @ V for a in flat.actions}


def greedy_actions(flat: FlatMDP, V: np.ndarray, tol: float = TIE_TOL) -> list[str]:
    """argmax_a Q_a per state; near-ties go to the earliest action in priority order."""
    Q = q_values(flat, V)
    stack = np.stack([Q[a] for a in flat.actions])
    best = stack.max(axis=0)
    scale = np.maximum(1.0, np.abs(best))
    first = np.argmax(stack >= best - tol * scale, axis=0)
    return [flat.actions[i] for i in first]


def exact_policy_iteration(flat: FlatMDP, start=None, max_iter: int = 1000):
    """Optimal per-state policy and its value by exact policy iteration."""
    policy = policy_actions(flat, start if start is not None else flat.actions[0])
    for _ in range(max_iter):
        V = exact_policy_value(flat, policy)
        new = greedy_actions(flat, V)
        if new == policy:
            return policy, V
        policy = new
    raise RuntimeError("policy iteration did not converge")


def value_iteration(flat: FlatMDP, policy=None, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Optimal values, or the values of ``policy`` when one is given."""
    P = policy_matrix(flat, policy) if policy is not None else None
    V = np.zeros(flat.N)
    for _ in range(max_iter):
        if P is not None:
            new = flat.R + flat.gamma * P @ V
        else:
            new = np.max(np.stack(list(q_values(flat, V).values())), axis=0)
        if np.abs(new - V).max() < tol:
            return new
        V = new
    return V


def stationary_distribution(flat: FlatMDP, policy, tol: float = 1e-12) -> np.ndarray:
    """The unique stationary distribution of the chain induced by ``policy``.

    Requires exactly one closed communicating class; power iteration is tried
    first and a dense solve covers periodic or slowly mixing chains.
    """
    P = policy_matrix(flat, policy)
    n_comp, labels = scipy.sparse.csgraph.connected_components(P > 0, directed=True, connection="strong")
    closed = 0
    for c in range(n_comp):
        members = labels == c
        if P[members][:, ~members].sum() == 0:
            closed += 1
    if closed != 1:
        raise NonUniqueStationary(f"chain has {closed} closed classes")
    rho = np.full(flat.N, 1.0 / flat.N)
    for _ in range(100_000):
        nxt = rho @ P
        if np.abs(nxt - rho).max() < tol:
            return nxt / nxt.sum()
        rho = nxt
    A = np.vstack([P.T - np.eye(flat.N), np.ones(flat.N)])
    b = np.zeros(flat.N + 1)
    b[-1] = 1.0
    rho = np.linalg.lstsq(A, b, rcond=None)[0]
    return rho / rho.sum()


def exact_gram(flat: FlatMDP, basis: Basis, weights: np.ndarray, policy) -> GramSystem:
    A = basis_matrix(basis, flat.states)
    L = np.diag(weights)
    P = policy_matrix(flat, policy)
    return GramSystem(A.T @ L @ A, A.T @ L @ P @ A, A.T @ L @ flat.R, flat.gamma)


def exact_fixed_point(flat: FlatMDP, basis: Basis, weights: np.ndarray, policy) -> np.ndarray:
    """w solving A^T L A w = A^T L (gamma P A w + R) with dense matrices."""
    g = exact_gram(flat, basis, weights, policy)
    return np.linalg.solve(g.M - flat.gamma * g.C, g.r)


def exact_projection(A: np.ndarray, weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    L = np.diag(weights)
    return np.linalg.solve(A.T @ L @ A, A.T @ L @ values)


def iterate_projected(system: GramSystem, steps: int = 10_000, tol: float = 1e-13) -> np.ndarray | None:
    """w <- M^{-1}(gamma C w + r) from w = 0; None if it fails to converge."""
    B = system.gamma * np.linalg.solve(system.M, system.C)
    c = np.linalg.solve(system.M, system.r)
    w = np.zeros(system.k)
    for _ in range(steps):
        nxt = B @ w + c
        if not np.all(np.isfinite(nxt)):
            return None
        if np.abs(nxt - w).max() < tol * max(1.0, np.abs(nxt).max()):
            return nxt
        w = nxt
    return None


def branch_counts(
    flat: FlatMDP, policy: DecisionListPolicy, l: int, probe: Sequence[int], weights: np.ndarray | None = None
) -> np.ndarray:
    """Brute-force (weighted) count of states in branch l per probe assignment."""
    branches = policy.branches()
    out = np.zeros([flat.cards[v] for v in probe])
    for s, state in enumerate(flat.states):
        state = tuple(state)
        hit = next(i for i, c in enumerate(branches) if c.matches(state))
        if hit == l:
            out[tuple(state[v] for v in probe)] += 1.0 if weights is None else weights[s]
    return out


def greedy_residual_vector(flat: FlatMDP, V: np.ndarray) -> np.ndarray:
    """max_a Q_a - V per state."""
    Q = q_values(flat, V)
    return np.max(np.stack([Q[a] for a in flat.actions]), axis=0) - V


def one_sided_greedy_error(flat: FlatMDP, V: np.ndarray) -> float:
    Q = q_values(flat, V)
    return float(max((Q[a] - V).max() for a in flat.actions))


def policy_residual_vector(flat: FlatMDP, V: np.ndarray, policy) -> np.ndarray:
    """V - (R + gamma P_pi V) per state."""
    return V - flat.R - flat.gamma * policy_matrix(flat, policy) @ V


def policy_string(flat: FlatMDP, policy, sep: str = "") -> str:
    return sep.join(policy_actions(flat, policy))
