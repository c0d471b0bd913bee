"""Built-in example problems.

``chain4``: four states in a row, actions L and R that move in their direction
with probability 0.9 and the other way with probability 0.1 (a move off the
end of the chain stays put by default). The middle states pay 1. The basis spans
parabolas: 1, x, x^2.

``dbn5``: five binary variables in a chain. By default each X_i persists with
probability 0.9 and is switched on by X_{i-1} with probability 0.1 (X_1 only
persists). Action a_i instead sets X_i with probability 0.95. The default is
itself executable. Reward 1 when X_5 is on; basis h_i = 1[X_i = 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CPD, ActionSpec, Basis, Factor, FactoredMDP, VariableSpec


@dataclass(frozen=True)
class DemoModel:
    name: str
    model: FactoredMDP
    basis: Basis
    start_action: str


BOUNDARIES = ("self-loop", "reflect")


def chain_cpd(direction: int, p: float = 0.9, size: int = 4, boundary: str = "self-loop") -> CPD:
    """Move ``direction`` with probability p, the other way otherwise.

    A move off either end stays put ("self-loop") or goes the other way
    ("reflect").
    """
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary convention {boundary!r}")
    table = np.zeros((size, size))
    for s in range(size):
        for step, prob in ((direction, p), (-direction, 1.0 - p)):
            t = s + step
            if not 0 <= t < size:
                t = s if boundary == "self-loop" else s - step
            table[s, t] += prob
    return CPD(0, (0,), table)


def chain4(gamma: float = 0.9, boundary: str = "self-loop") -> DemoModel:
    x = np.arange(4.0)
    model = FactoredMDP(
        variables=(VariableSpec(0, "X", 4),),
        default=(chain_cpd(+1, boundary=boundary),),
        actions=(ActionSpec("L", {0: chain_cpd(-1, boundary=boundary)}), ActionSpec("R", {})),
        rewards=(Factor((0,), [0.0, 1.0, 1.0, 0.0]),),
        gamma=gamma,
        default_is_action=False,
    )
    basis = Basis((Factor.constant(1.0), Factor((0,), x), Factor((0,), x**2)))
    return DemoModel("chain4", model, basis, "R")


def dbn5(gamma: float = 0.9) -> DemoModel:
    n = 5
    variables = tuple(VariableSpec(i, f"X_{i + 1}", 2) for i in range(n))
    default = [CPD(0, (0,), [[1.0, 0.0], [0.1, 0.9]])]
    for i in range(1, n):
        table = np.zeros((2, 2, 2))  # (X_{i-1}, X_i, X'_i)
        for prev in (0, 1):
            for cur in (0, 1):
                on = 0.9 * cur + 0.1 * prev
                table[prev, cur] = (1.0 - on, on)
        default.append(CPD(i, (i - 1, i), table))
    actions = []
    for i, cpd in enumerate(default):
        fixed = np.broadcast_to([0.05, 0.95], cpd.values.shape).copy()
        actions.append(ActionSpec(f"a_{i + 1}", {i: CPD(i, cpd.parents, fixed)}))
    model = FactoredMDP(
        variables=variables,
        default=tuple(default),
        actions=tuple(actions),
        rewards=(Factor((4,), [0.0, 1.0]),),
        gamma=gamma,
        default_is_action=True,
    )
    basis = Basis(tuple(Factor((i,), [0.0, 1.0]) for i in range(n)))
    return DemoModel("dbn5", model, basis, "a_1")


DEMOS = {"chain4": chain4, "dbn5": dbn5}


def build_demo(name: str) -> DemoModel:
    try:
        return DEMOS[name]()
    except KeyError:
        raise KeyError(f"unknown demo {name!r}; choose from {sorted(DEMOS)}") from None
