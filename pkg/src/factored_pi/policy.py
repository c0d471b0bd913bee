"""Greedy policies of factored value functions, as decision lists.

Q_a = R + gamma * sum_j w_j [P_a h_j]. Only basis functions whose scope meets
Effects[a] back-project differently under a and under the default model, so
the bonus delta_a = Q_a - Q_d lives on the small scope T_a. Sorting every
(t, a, delta_a(t)) by decreasing delta gives a decision list whose first
match is the greedy action.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .factors import back_project, extend, sum_factors
from .model import (
    DEFAULT_ACTION,
    Assignment,
    Basis,
    Factor,
    FactoredMDP,
    action_cpds,
    effects,
    scope_union,
)

EMPTY = Assignment((), ())


@dataclass(frozen=True)
class QFunction:
    action: str
    terms: tuple[Factor, ...]

    def __call__(self, state: Sequence[int]) -> float:
        return float(sum(f(state) for f in self.terms))


@dataclass(frozen=True)
class DeltaFunction:
    action: str
    factor: Factor
    indices: tuple[int, ...]

    @property
    def scope(self):
        return self.factor.scope


@dataclass(frozen=True)
class Conditional:
    t: Assignment
    action: str
    delta: float

    def matches(self, state: Sequence[int]) -> bool:
        return self.t.consistent_with(state)


@dataclass(frozen=True)
class DecisionListPolicy:
    conditionals: tuple[Conditional, ...]
    fallback: str | None = None

    def __len__(self):
        return len(self.conditionals)

    def key(self) -> tuple:
        """Structural identity: the (t, action) sequence and fallback, deltas ignored."""
        return (
            tuple((c.action, c.t.scope, c.t.values) for c in self.conditionals),
            self.fallback,
        )

    def branches(self) -> tuple[Conditional, ...]:
        """Conditionals in execution order, the fallback included as a catch-all.

        The fallback is the default action, whose bonus over itself is 0, so
        its catch-all sits after every conditional with delta >= 0 (ties favor
        the explicit action). Conditionals with negative delta follow it and
        are unreachable; pruning merely deletes them.
        """
        if self.fallback is None:
            return self.conditionals
        cut = next((i for i, c in enumerate(self.conditionals) if c.delta < 0), len(self.conditionals))
        return self.conditionals[:cut] + (Conditional(EMPTY, self.fallback, 0.0),) + self.conditionals[cut:]

    def render(self, model: FactoredMDP | None = None, digits: int = 12) -> str:
        def name(v):
            return model.var_name(v) if model is not None else f"X{v}"

        lines = []
        dead = False
        for c in self.branches():
            if self.fallback is not None and c.t is EMPTY and c.action == self.fallback and not dead:
                lines.append(f"else → {self.fallback}")
                dead = True
                continue
            test = " ∧ ".join(f"{name(v)}={x}" for v, x in zip(c.t.scope, c.t.values)) or "true"
            lines.append(f"if {test} → {c.action} (δ={c.delta:.{digits}g})" + (" [unreachable]" if dead else ""))
        return "\n".join(lines)


def catch_all(action: str) -> DecisionListPolicy:
    """The policy that takes ``action`` in every state."""
    return DecisionListPolicy((Conditional(EMPTY, action, 0.0),), None)


class _Projections:
    """Memo of back-projected basis functions, keyed by (action, index)."""

    def __init__(self, model: FactoredMDP, basis: Basis):
        self.model = model
        self.basis = basis
        self._cpds: dict[str, tuple] = {}
        self._memo: dict[tuple[str, int], Factor] = {}

    def __call__(self, action: str | None, j: int) -> Factor:
        key = (action, j)
        if key not in self._memo:
            if action not in self._cpds:
                # None stands for the default transition model.
                self._cpds[action] = (
                    self.model.default if action is None else action_cpds(self.model, action)
                )
            self._memo[key] = back_project(self.basis.functions[j], self._cpds[action])
        return self._memo[key]


def q_function(model: FactoredMDP, basis: Basis, action: str, projections=None) -> QFunction:
    w = basis.require_coefficients()
    proj = projections or _Projections(model, basis)
    terms = list(model.rewards)
    terms += [proj(action, j).scaled(model.gamma * wj) for j, wj in enumerate(w)]
    return QFunction(action, tuple(terms))


def affected_indices(model: FactoredMDP, basis: Basis, action: str) -> tuple[int, ...]:
    eff = set(effects(model, action))
    return tuple(i for i, h in enumerate(basis.functions) if eff.intersection(h.scope))


def delta_function(model: FactoredMDP, basis: Basis, action: str, projections=None) -> DeltaFunction:
    """delta_a = gamma * sum_{i in I_a} w_i ([P_a h_i] - [P_d h_i]) over T_a."""
    w = basis.require_coefficients()
    proj = projections or _Projections(model, basis)
    idx = affected_indices(model, basis, action)
    diffs = []
    for i in idx:
        pa, pd = proj(action, i), proj(None, i)
        diffs.append((pa.scaled(model.gamma * w[i]), pd.scaled(-model.gamma * w[i])))
    scope = scope_union(*(f.scope for pair in diffs for f in pair))
    if not diffs:
        return DeltaFunction(action, Factor.constant(0.0), ())
    total = sum_factors([f for pair in diffs for f in pair])
    return DeltaFunction(action, extend(total, scope, model.cards), idx)


def _sort_key(c: Conditional):
    return (-c.delta, c.action, c.t.values)


def extract_decision_list(
    model: FactoredMDP, basis: Basis, prune: bool | None = None, projections=None
) -> DecisionListPolicy:
    """The greedy policy for V = sum_j w_j h_j as a decision list.

    Ties on delta go to the smaller action id, then the lexicographically
    smaller t. With an executable default, the default is the fallback and
    conditionals with negative delta may be pruned (on by default).
    """
    proj = projections or _Projections(model, basis)
    conds = []
    for a in model.actions:
        delta = delta_function(model, basis, a.id, proj)
        vals = delta.factor.values
        for t in np.ndindex(vals.shape):
            conds.append(Conditional(Assignment(delta.scope, t), a.id, float(vals[t])))
    conds.sort(key=_sort_key)
    if model.default_is_action:
        if prune is None or prune:
            conds = [c for c in conds if c.delta >= 0.0]
        return DecisionListPolicy(tuple(conds), DEFAULT_ACTION)
    return DecisionListPolicy(tuple(conds), None)


def apply_policy(policy: DecisionListPolicy, state: Sequence[int] | Assignment) -> str:
    if isinstance(state, Assignment):
        d = state.as_dict()
        state = [d[v] for v in range(len(d))]
    for c in policy.branches():
        if c.matches(state):
            return c.action
    raise ValueError(f"state {tuple(state)} matches no conditional and there is no fallback")


def list_size_bound(model: FactoredMDP, basis: Basis) -> int:
    """Sum over actions of |Dom(T_a)|."""
    proj = _Projections(model, basis.with_coefficients(np.zeros(basis.k)))
    total = 0
    for a in model.actions:
        scope = scope_union(
            *(proj(act, i).scope for i in affected_indices(model, basis, a.id) for act in (a.id, None))
        )
        size = 1
        for v in scope:
            size *= model.cards[v]
        total += size
    return total
