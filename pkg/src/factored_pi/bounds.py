"""Max-norm Bellman errors of factored value functions.

Each residual is a sum of small-scope functions, so its maximum over the
exponential state space is a cost network solved by max-sum elimination.
Hard constraints (branch membership for decision lists) are applied as
evidence and as large additive penalties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .elimination import MAX_WIDTH, max_sum
from .factors import restrict
from .model import Assignment, Basis, Factor, FactoredMDP, FactoredWeights
from .policy import (
    DecisionListPolicy,
    _Projections,
    apply_policy,
    extract_decision_list,
)

PENALTY = -1e18

ONE_SIDED = "one-sided-max"
SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class CostNetwork:
    """Maximize the sum of ``terms`` over states matching every ``require``
    assignment and no ``forbid`` assignment."""

    terms: tuple[Factor, ...]
    require: tuple[Assignment, ...] = ()
    forbid: tuple[Assignment, ...] = ()


@dataclass(frozen=True)
class ErrorReport:
    epsilon: float
    witness: tuple[int, ...]
    loss_bound: float
    direction: str
    source: str = ""
    parts: dict = field(default_factory=dict)


def maximize(
    network: CostNetwork,
    cards: Sequence[int],
    max_width: int = MAX_WIDTH,
) -> tuple[float, tuple[int, ...] | None]:
    """Maximum of the network and a maximizing full state.

    Returns ``(-inf, None)`` when no state satisfies the constraints.
    """
    n = len(cards)
    ev: dict[int, int] = {}
    for t in network.require:
        for v, x in zip(t.scope, t.values):
            if ev.setdefault(v, x) != x:
                return -math.inf, None
    evidence = Assignment.from_dict(ev)
    factors = [restrict(f, ev) for f in network.terms]
    for t in network.forbid:
        if evidence.conflicts(t):
            continue
        rest = tuple((v, x) for v, x in zip(t.scope, t.values) if v not in ev)
        if not rest:
            return -math.inf, None
        scope = tuple(v for v, _ in rest)
        pen = np.zeros([cards[v] for v in scope])
        pen[tuple(x for _, x in rest)] = PENALTY
        factors.append(Factor(scope, pen))
    free = [v for v in range(n) if v not in ev]
    result = max_sum(factors, cards, variables=free, max_width=max_width)
    if result.value < PENALTY / 2:
        return -math.inf, None
    state = [0] * n
    for v, x in ev.items():
        state[v] = x
    for v, x in result.assignment.items():
        state[v] = x
    state = tuple(state)
    for t in network.require:
        if not t.consistent_with(state):
            raise RuntimeError(f"witness {state} violates required {t}")
    for t in network.forbid:
        if t.consistent_with(state):
            raise RuntimeError(f"witness {state} violates forbidden {t}")
    return result.value, state


def _value_terms(basis: Basis, sign: float) -> list[Factor]:
    return [h.scaled(sign * w) for h, w in zip(basis.functions, basis.require_coefficients())]


def _backup_terms(model: FactoredMDP, basis: Basis, action: str, proj, sign: float) -> list[Factor]:
    """sign * (R + gamma * sum_j w_j P_a h_j)."""
    w = basis.require_coefficients()
    terms = [r.scaled(sign) for r in model.rewards]
    terms += [proj(action, j).scaled(sign * model.gamma * wj) for j, wj in enumerate(w)]
    return terms


def _loss_bound(eps: float, gamma: float) -> float:
    return 2.0 * eps / (1.0 - gamma)


def _branch_max(model, basis, policy, proj, sign, max_width):
    """max over branches l of sign * (V - backup_{a_l}) restricted to S_l."""
    best, witness, source = -math.inf, None, ""
    branches = policy.branches()
    for l, cond in enumerate(branches):
        net = CostNetwork(
            tuple(_value_terms(basis, sign) + _backup_terms(model, basis, cond.action, proj, -sign)),
            require=(cond.t,),
            forbid=tuple(c.t for c in branches[:l]),
        )
        val, state = maximize(net, model.cards, max_width)
        if state is not None and val > best:
            best, witness, source = val, state, f"branch {l} ({cond.action})"
    return best, witness, source


def bellman_error_greedy(
    model: FactoredMDP,
    basis: Basis,
    symmetric: bool = True,
    max_width: int = MAX_WIDTH,
) -> ErrorReport:
    """Bellman residual of V = sum_j w_j h_j against the optimality backup.

    One-sided: max_a max_x [Q_a(x) - V(x)]. Symmetric additionally maximizes
    V(x) - max_a Q_a(x), branch by branch over the greedy decision list, and
    reports the larger of the two: the max-norm residual needed by the
    2 eps / (1 - gamma) loss bound.
    """
    proj = _Projections(model, basis)
    up, up_state, up_src = -math.inf, None, ""
    for a in model.executable_actions():
        net = CostNetwork(tuple(_backup_terms(model, basis, a, proj, 1.0) + _value_terms(basis, -1.0)))
        val, state = maximize(net, model.cards, max_width)
        if val > up:
            up, up_state, up_src = val, state, a
    parts = {"above": up}
    eps, witness, source = up, up_state, f"Q_{up_src} - V"
    if symmetric:
        greedy = extract_decision_list(model, basis, projections=proj)
        down, down_state, down_src = _branch_max(model, basis, greedy, proj, 1.0, max_width)
        parts["below"] = down
        if down > eps:
            eps, witness, source = down, down_state, f"V - Q ({down_src})"
    return ErrorReport(
        eps, witness, _loss_bound(eps, model.gamma), SYMMETRIC if symmetric else ONE_SIDED, source, parts
    )


def bellman_error_policy(
    model: FactoredMDP,
    basis: Basis,
    policy: DecisionListPolicy,
    symmetric: bool = True,
    max_width: int = MAX_WIDTH,
) -> ErrorReport:
    """Residual of V against the backup of a fixed decision-list policy.

    One-sided: max_x [V(x) - gamma (P_pi V)(x) - R(x)], solved per branch of
    the list under its membership constraints.
    """
    proj = _Projections(model, basis)
    up, up_state, up_src = _branch_max(model, basis, policy, proj, 1.0, max_width)
    parts = {"above": up}
    eps, witness, source = up, up_state, up_src
    if symmetric:
        down, down_state, down_src = _branch_max(model, basis, policy, proj, -1.0, max_width)
        parts["below"] = down
        if down > eps:
            eps, witness, source = down, down_state, down_src
    return ErrorReport(
        eps, witness, _loss_bound(eps, model.gamma), SYMMETRIC if symmetric else ONE_SIDED, source, parts
    )


def value_at(basis: Basis, state: Sequence[int]) -> float:
    return float(sum(w * h(state) for h, w in zip(basis.functions, basis.require_coefficients())))


def backup_at(model: FactoredMDP, basis: Basis, action: str, state: Sequence[int], proj=None) -> float:
    proj = proj or _Projections(model, basis)
    return float(sum(f(state) for f in _backup_terms(model, basis, action, proj, 1.0)))


def greedy_residual(model: FactoredMDP, basis: Basis, state: Sequence[int]) -> float:
    """max_a Q_a(state) - V(state), evaluated directly at one state."""
    proj = _Projections(model, basis)
    best = max(backup_at(model, basis, a, state, proj) for a in model.executable_actions())
    return best - value_at(basis, state)


def policy_residual(
    model: FactoredMDP, basis: Basis, policy: DecisionListPolicy, state: Sequence[int]
) -> float:
    """V(state) - R(state) - gamma (P_pi V)(state)."""
    a = apply_policy(policy, state)
    return value_at(basis, state) - backup_at(model, basis, a, state)


def boost_witness(rho: FactoredWeights, witness: Sequence[int], eta: float) -> FactoredWeights:
    """Scale each cluster's entry at the witness by (1 + eta), then renormalize."""
    clusters = []
    for marg in rho.clusters:
        vals = np.array(marg.values)
        vals[tuple(witness[v] for v in marg.scope)] *= 1.0 + eta
        clusters.append(Factor(marg.scope, vals / vals.sum()))
    return FactoredWeights(tuple(clusters))
