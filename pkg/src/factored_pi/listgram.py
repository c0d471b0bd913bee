"""Value determination for decision-list policies.

A decision list partitions the state space into branches S_l: states that
match t_l and none of t_1..t_{l-1}. On S_l the policy follows a_l, so

    (h_i . P_pi h_j) = sum_l sum_z N_l(z) * h_i(z) [P_{a_l} h_j](z)

with z ranging over Z = Gamma_{a_l}(C_j) | C_i and N_l(z) the (weighted) number
of states of S_l consistent with z. N_l is a model count of a constraint
network (one indicator per conditional, plus the weight marginals) and is
computed by sum-product variable elimination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .elimination import MAX_WIDTH, induced_width, min_fill_order, sum_product
from .factors import multiply, restrict, weight_table
from .model import (
    Assignment,
    Basis,
    Factor,
    FactoredMDP,
    FactoredWeights,
    Scope,
)
from .policy import DecisionListPolicy, _Projections
from .value import Solution, gram_matrix, reward_vector, solve_fixed_point, GramSystem


@dataclass(frozen=True)
class BranchConstraintSystem:
    """Membership in one branch S_l, probed on the variables ``probe``."""

    positive: Assignment
    negatives: tuple[Assignment, ...]
    probe: Scope
    cards: tuple[int, ...]

    def constraint_scopes(self) -> list[Scope]:
        return [self.positive.scope, *(t.scope for t in self.negatives), self.probe]


@dataclass(frozen=True)
class CountTable:
    """Mass of S_l consistent with each assignment of ``factor.scope``."""

    factor: Factor
    weighted: bool

    @property
    def scope(self) -> Scope:
        return self.factor.scope

    @property
    def values(self) -> np.ndarray:
        return self.factor.values

    def total(self) -> float:
        return float(self.factor.values.sum())


def branch_system(
    policy: DecisionListPolicy, l: int, probe: Sequence[int], cards: Sequence[int]
) -> BranchConstraintSystem:
    branches = policy.branches()
    return BranchConstraintSystem(
        branches[l].t,
        tuple(c.t for c in branches[:l]),
        tuple(sorted(probe)),
        tuple(cards),
    )


def constraint_width(system: BranchConstraintSystem) -> tuple[int, list[int]]:
    """Induced width and min-fill order of the full constraint graph.

    This is the graph before any simplification: the positive test, every
    earlier test, and the probe scope, with the probe variables kept.
    """
    scopes = system.constraint_scopes()
    mentioned = set().union(*scopes)
    elim = sorted(mentioned - set(system.probe))
    order = min_fill_order(scopes, elim)
    return induced_width(scopes, order, keep=system.probe), order


def _compact(factors: list[Factor]) -> list[Factor]:
    """Merge factors over identical scopes (their product); drop duplicates."""
    by_scope: dict[Scope, np.ndarray] = {}
    for f in factors:
        if f.scope in by_scope:
            by_scope[f.scope] = by_scope[f.scope] * f.values
        else:
            by_scope[f.scope] = f.values
    return [Factor(s, v) for s, v in by_scope.items()]


def _reduce(system_positive: Assignment, negatives, cards, rho) -> list[Factor] | None:
    """Constraint factors with the positive test absorbed as evidence.

    Returns None when the branch is empty (some earlier test is implied by
    the positive one).
    """
    ev = system_positive.as_dict()
    factors: list[Factor] = []
    seen = set()
    for t in negatives:
        if system_positive.conflicts(t):
            continue  # every state matching t_l already fails t_m
        rest = tuple((v, x) for v, x in zip(t.scope, t.values) if v not in ev)
        if not rest:
            return None
        if rest in seen:
            continue
        seen.add(rest)
        scope = tuple(v for v, _ in rest)
        ind = np.ones([cards[v] for v in scope])
        ind[tuple(x for _, x in rest)] = 0.0
        factors.append(Factor(scope, ind))
    if rho is not None:
        factors += [restrict(m, ev) for m in rho.clusters]
    return _compact(factors)


def _mass(
    factors: list[Factor],
    positive: Assignment,
    probe: Scope,
    cards: Sequence[int],
    weighted: bool,
    max_width: int,
) -> Factor:
    ev = positive.as_dict()
    keep = tuple(v for v in probe if v not in ev)
    free = [v for v in range(len(cards)) if v not in ev]
    inner = sum_product(factors, keep, cards, over=free, max_width=max_width)
    out = np.zeros([cards[v] for v in probe])
    index = tuple(ev[v] if v in ev else slice(None) for v in probe)
    out[index] = inner.values
    return Factor(probe, out)


def branch_mass(
    system: BranchConstraintSystem,
    rho: FactoredWeights | None = None,
    max_width: int = MAX_WIDTH,
) -> CountTable:
    """Weighted (rho given) or raw (rho None) count of S_l per probe assignment.

    The positive test is applied as evidence; each earlier test becomes a
    factor 1 - 1[t_m] over its remaining variables; then every variable off
    the probe scope is summed out along a min-fill order.
    """
    factors = _reduce(system.positive, system.negatives, system.cards, rho)
    if factors is None:
        return CountTable(
            Factor(system.probe, np.zeros([system.cards[v] for v in system.probe])), rho is not None
        )
    table = _mass(factors, system.positive, system.probe, system.cards, rho is not None, max_width)
    return CountTable(table, rho is not None)


class ListGram:
    """C[i, j] = (h_i . P_pi h_j) for a decision-list policy, with memoized branch masses.

    ``rho=None`` selects raw counting (unweighted sums over states).
    """

    def __init__(
        self,
        model: FactoredMDP,
        basis: Basis,
        policy: DecisionListPolicy,
        rho: FactoredWeights | None,
        max_width: int = MAX_WIDTH,
        projections=None,
    ):
        self.model = model
        self.basis = basis
        self.rho = rho
        self.branches = policy.branches()
        self.max_width = max_width
        self.proj = projections or _Projections(model, basis)
        self._reduced: dict[int, list[Factor] | None] = {}
        self._mass: dict[tuple[int, Scope], Factor] = {}

    def reduced(self, l: int) -> list[Factor] | None:
        if l not in self._reduced:
            self._reduced[l] = _reduce(
                self.branches[l].t,
                [c.t for c in self.branches[:l]],
                self.model.cards,
                self.rho,
            )
        return self._reduced[l]

    def mass(self, l: int, probe: Scope) -> Factor | None:
        """Branch mass over ``probe``; None for an empty branch."""
        factors = self.reduced(l)
        if factors is None:
            return None
        key = (l, probe)
        if key not in self._mass and l == 0 and self.rho is not None and not self.branches[0].t.scope:
            # unconstrained first branch: its mass is the weight marginal itself
            self._mass[key] = weight_table(self.rho, probe)
        if key not in self._mass:
            self._mass[key] = _mass(
                factors,
                self.branches[l].t,
                probe,
                self.model.cards,
                self.rho is not None,
                self.max_width,
            )
        return self._mass[key]

    def entry(self, i: int, j: int) -> float:
        hi = self.basis.functions[i]
        total = 0.0
        for l, cond in enumerate(self.branches):
            if self.reduced(l) is None:
                continue
            f = multiply(hi, self.proj(cond.action, j))
            m = self.mass(l, f.scope)
            total += float((m.values * f.values).sum())
        return total

    def matrix(self) -> np.ndarray:
        k = self.basis.k
        return np.array([[self.entry(i, j) for j in range(k)] for i in range(k)])


def list_gram_entry(
    i: int,
    j: int,
    policy: DecisionListPolicy,
    model: FactoredMDP,
    basis: Basis,
    rho: FactoredWeights | None,
) -> float:
    return ListGram(model, basis, policy, rho).entry(i, j)


def build_gram_decision_list(
    model: FactoredMDP,
    basis: Basis,
    rho: FactoredWeights,
    policy: DecisionListPolicy,
    max_width: int = MAX_WIDTH,
) -> GramSystem:
    C = ListGram(model, basis, policy, rho, max_width).matrix()
    return GramSystem(gram_matrix(basis, rho), C, reward_vector(model, basis, rho), model.gamma)


def solve_decision_list_policy(
    model: FactoredMDP,
    basis: Basis,
    rho: FactoredWeights,
    policy: DecisionListPolicy,
    max_width: int = MAX_WIDTH,
) -> Solution:
    return solve_fixed_point(build_gram_decision_list(model, basis, rho, policy, max_width))
