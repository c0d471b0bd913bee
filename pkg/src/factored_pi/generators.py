"""Random small instances for property tests and experiment scripts."""

from __future__ import annotations

import numpy as np

from .model import (
    CPD,
    DEFAULT_ACTION,
    ActionSpec,
    Assignment,
    Basis,
    Factor,
    FactoredMDP,
    FactoredWeights,
    VariableSpec,
)
from .policy import EMPTY, Conditional, DecisionListPolicy


def _scope(rng: np.random.Generator, n: int, lo: int, hi: int) -> tuple[int, ...]:
    size = int(rng.integers(lo, min(hi, n) + 1))
    return tuple(sorted(int(v) for v in rng.choice(n, size=size, replace=False)))


def random_cpd(rng, child: int, n: int, cards, max_parents: int) -> CPD:
    parents = _scope(rng, n, 0, max_parents)
    shape = tuple(cards[p] for p in parents) + (cards[child],)
    rows = rng.dirichlet(np.ones(cards[child]), size=int(np.prod(shape[:-1], dtype=int)))
    return CPD(child, parents, rows.reshape(shape))


def random_factor(rng, n: int, cards, lo: int, hi: int, low=-1.0, high=1.0) -> Factor:
    scope = _scope(rng, n, lo, hi)
    return Factor(scope, rng.uniform(low, high, size=[cards[v] for v in scope]))


def random_model(
    rng: np.random.Generator,
    n: int | None = None,
    max_n: int = 8,
    cards: int | tuple[int, int] = 2,
    max_parents: int = 2,
    n_actions: int | None = None,
    max_effects: int = 2,
    max_scope: int = 3,
    n_rewards: int | None = None,
    default_is_action: bool | None = None,
    gamma: float | None = None,
) -> FactoredMDP:
    if n is None:
        n = int(rng.integers(1, max_n + 1))
    if isinstance(cards, int):
        card = [cards] * n
    else:
        card = [int(rng.integers(cards[0], cards[1] + 1)) for _ in range(n)]
    variables = tuple(VariableSpec(i, f"X{i}", c) for i, c in enumerate(card))
    default = tuple(random_cpd(rng, i, n, card, max_parents) for i in range(n))
    if n_actions is None:
        n_actions = int(rng.integers(1, 4))
    actions = []
    for a in range(n_actions):
        eff = _scope(rng, n, 0 if a else 1, max_effects)
        actions.append(
            ActionSpec(f"a{a}", {v: random_cpd(rng, v, n, card, max_parents) for v in eff})
        )
    if n_rewards is None:
        n_rewards = int(rng.integers(1, 4))
    rewards = tuple(random_factor(rng, n, card, 1, max_scope, 0.0, 1.0) for _ in range(n_rewards))
    if default_is_action is None:
        default_is_action = bool(rng.integers(0, 2))
    if gamma is None:
        gamma = float(rng.uniform(0.5, 0.95))
    return FactoredMDP(variables, default, tuple(actions), rewards, gamma, default_is_action)


def random_basis(rng, model: FactoredMDP, k: int | None = None, max_scope: int = 2, constant: bool = True) -> Basis:
    if k is None:
        k = int(rng.integers(1, 7))
    fs = [Factor.constant(1.0)] if constant else []
    while len(fs) < k:
        fs.append(random_factor(rng, model.n, model.cards, 1, max_scope))
    return Basis(tuple(fs[:k]))


def random_weights(rng, model: FactoredMDP, max_cluster: int = 2) -> FactoredWeights:
    order = [int(v) for v in rng.permutation(model.n)]
    clusters = []
    while order:
        size = int(rng.integers(1, max_cluster + 1))
        scope, order = tuple(sorted(order[:size])), order[size:]
        shape = [model.cards[v] for v in scope]
        p = rng.dirichlet(np.ones(int(np.prod(shape))) * 2.0)
        clusters.append(Factor(scope, p.reshape(shape)))
    return FactoredWeights(tuple(sorted(clusters, key=lambda f: f.scope)))


def random_decision_list(rng, model: FactoredMDP, length: int | None = None, max_scope: int = 3) -> DecisionListPolicy:
    """Random conditionals in decreasing-delta order, always covering every state."""
    if length is None:
        length = int(rng.integers(1, 12))
    ids = model.action_ids
    # mostly positive so that, behind an executable default, most conditionals stay reachable
    deltas = np.sort(rng.uniform(-0.25, 1, size=length))[::-1]
    conds = []
    for d in deltas:
        scope = _scope(rng, model.n, 0, max_scope)
        t = Assignment(scope, tuple(int(rng.integers(model.cards[v])) for v in scope))
        conds.append(Conditional(t, str(rng.choice(ids)), float(d)))
    if model.default_is_action:
        return DecisionListPolicy(tuple(conds), DEFAULT_ACTION)
    conds.append(Conditional(EMPTY, str(rng.choice(ids)), -2.0))
    return DecisionListPolicy(tuple(conds), None)
