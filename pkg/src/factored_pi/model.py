"""Data model for factored MDPs.

A state is an assignment to discrete variables ``X_0 .. X_{n-1}``. Every
table in the package (factors, CPDs, weight marginals) is a dense numpy array
whose axes follow the scope order, so the flattened C-order layout is
mixed-radix with the last scope variable varying fastest.

Transitions are a default DBN plus per-action CPD overrides; the variables an
action overrides are its effects. Rewards are additive over small scopes and
do not depend on the action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_ACTION = "d"
NORM_TOL = 1e-9

Scope = tuple[int, ...]


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


def _check_scope(scope: Sequence[int]) -> Scope:
    scope = tuple(int(v) for v in scope)
    if any(a >= b for a, b in zip(scope, scope[1:])):
        raise ValueError(f"scope {scope} is not strictly ascending")
    return scope


@dataclass(frozen=True)
class VariableSpec:
    id: int
    name: str
    cardinality: int


@dataclass(frozen=True)
class Assignment:
    """Values for a subset of variables (a partial state)."""

    scope: Scope
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "scope", _check_scope(self.scope))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.scope) != len(self.values):
            raise ValueError("assignment scope and values differ in length")

    @classmethod
    def from_dict(cls, mapping: Mapping[int, int]) -> "Assignment":
        items = sorted(mapping.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @classmethod
    def full(cls, values: Sequence[int]) -> "Assignment":
        return cls(tuple(range(len(values))), tuple(values))

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.scope, self.values))

    def consistent_with(self, state: Sequence[int]) -> bool:
        """True when a full state (indexed by variable id) agrees on our scope."""
        return all(state[v] == x for v, x in zip(self.scope, self.values))

    def conflicts(self, other: "Assignment") -> bool:
        mine = self.as_dict()
        return any(mine.get(v, x) != x for v, x in zip(other.scope, other.values))

    def __len__(self):
        return len(self.scope)


@dataclass(frozen=True, eq=False)
class Factor:
    """A real function of the variables in ``scope``.

    ``values`` has one axis per scope variable; ``values.ravel()`` is the flat
    mixed-radix table.
    """

    scope: Scope
    values: np.ndarray

    def __post_init__(self):
        scope = _check_scope(self.scope)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != len(scope):
            raise ValueError(
                f"factor over {scope} needs {len(scope)} axes, got shape {values.shape}"
            )
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_table(cls, scope: Sequence[int], cards: Sequence[int], table) -> "Factor":
        """Build from a flat table; ``cards`` are the scope cardinalities."""
        table = np.asarray(table, dtype=float).ravel()
        shape = tuple(int(c) for c in cards)
        if table.size != int(np.prod(shape, dtype=np.int64)):
            raise ValueError(
                f"table of length {table.size} does not match cardinalities {shape}"
            )
        return cls(tuple(scope), table.reshape(shape))

    @classmethod
    def constant(cls, value: float) -> "Factor":
        return cls((), np.array(float(value)))

    @classmethod
    def indicator(cls, assignment: Assignment, cards: Sequence[int]) -> "Factor":
        """1 where the scope takes ``assignment``'s values, 0 elsewhere.

        ``cards`` is indexed by variable id (model-wide).
        """
        values = np.zeros([cards[v] for v in assignment.scope])
        values[assignment.values] = 1.0
        return cls(assignment.scope, values)

    @property
    def cards(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def table(self) -> np.ndarray:
        return self.values.ravel()

    def __call__(self, state: Sequence[int] | Assignment) -> float:
        if isinstance(state, Assignment):
            lookup = state.as_dict()
            return float(self.values[tuple(lookup[v] for v in self.scope)])
        return float(self.values[tuple(state[v] for v in self.scope)])

    def scaled(self, c: float) -> "Factor":
        return Factor(self.scope, self.values * c)

    def __neg__(self) -> "Factor":
        return self.scaled(-1.0)

    def same_as(self, other: "Factor") -> bool:
        return self.scope == other.scope and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Factor(scope={self.scope}, table={self.table.tolist()})"


@dataclass(frozen=True, eq=False)
class CPD:
    """P(X'_child | parents), parents being current-time variables.

    ``values`` has one axis per parent followed by a last axis over the child.
    """

    child: int
    parents: Scope
    values: np.ndarray

    def __post_init__(self):
        parents = _check_scope(self.parents)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != len(parents) + 1:
            raise ValueError(
                f"CPD for {self.child} with parents {parents} needs "
                f"{len(parents) + 1} axes, got shape {values.shape}"
            )
        object.__setattr__(self, "child", int(self.child))
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_table(cls, child: int, parents: Sequence[int], cards: Sequence[int], table) -> "CPD":
        """``cards`` is indexed by variable id (model-wide)."""
        shape = tuple(cards[p] for p in parents) + (cards[child],)
        table = np.asarray(table, dtype=float).ravel()
        if table.size != int(np.prod(shape, dtype=np.int64)):
            raise ValueError(
                f"CPD table of length {table.size} does not match shape {shape}"
            )
        return cls(child, tuple(parents), table.reshape(shape))

    @property
    def table(self) -> np.ndarray:
        return self.values.ravel()

    def same_as(self, other: "CPD") -> bool:
        return (
            self.child == other.child
            and self.parents == other.parents
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class ActionSpec:
    id: str
    overrides: Mapping[int, CPD] = field(default_factory=dict)


@dataclass(frozen=True)
class FactoredMDP:
    variables: tuple[VariableSpec, ...]
    default: tuple[CPD, ...]
    actions: tuple[ActionSpec, ...]
    rewards: tuple[Factor, ...]
    gamma: float
    default_is_action: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "default", tuple(self.default))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "rewards", tuple(self.rewards))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    @property
    def num_states(self) -> int:
        """|Dom(X)| as an exact Python int."""
        total = 1
        for c in self.cards:
            total *= c
        return total

    @property
    def action_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.actions)

    def action(self, action_id: str) -> ActionSpec:
        for a in self.actions:
            if a.id == action_id:
                return a
        if action_id == DEFAULT_ACTION:
            return ActionSpec(DEFAULT_ACTION, {})
        raise KeyError(f"unknown action {action_id!r}")

    def executable_actions(self) -> tuple[str, ...]:
        """Actions a policy may choose, in tie-break priority order.

        Declared actions sort by id; an executable default comes last because
        its bonus over itself is exactly zero and it only wins when nothing
        else is strictly better.
        """
        ids = tuple(sorted(self.action_ids))
        if self.default_is_action:
            ids += (DEFAULT_ACTION,)
        return ids

    def var_name(self, var: int) -> str:
        return self.variables[var].name

    def with_gamma(self, gamma: float) -> "FactoredMDP":
        return FactoredMDP(
            self.variables, self.default, self.actions, self.rewards, gamma, self.default_is_action
        )


@dataclass(frozen=True)
class Basis:
    """Basis functions h_1..h_k and optional coefficients w; V = sum_j w_j h_j."""

    functions: tuple[Factor, ...]
    coefficients: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if self.coefficients is not None:
            w = _frozen(np.asarray(self.coefficients, dtype=float).ravel())
            if w.size != len(self.functions):
                raise ValueError(
                    f"{w.size} coefficients for {len(self.functions)} basis functions"
                )
            object.__setattr__(self, "coefficients", w)

    @property
    def k(self) -> int:
        return len(self.functions)

    def with_coefficients(self, w) -> "Basis":
        return Basis(self.functions, w)

    def require_coefficients(self) -> np.ndarray:
        if self.coefficients is None:
            raise ValueError("basis has no coefficients")
        return self.coefficients

    def value_terms(self) -> list[Factor]:
        """The factors w_j h_j whose sum is the value function."""
        w = self.require_coefficients()
        return [h.scaled(wj) for h, wj in zip(self.functions, w)]


@dataclass(frozen=True)
class FactoredWeights:
    """A distribution that is a product of marginals over disjoint clusters."""

    clusters: tuple[Factor, ...]

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))

    def cluster_of(self, var: int) -> int:
        for i, c in enumerate(self.clusters):
            if var in c.scope:
                return i
        raise KeyError(var)


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def index_of(values: Sequence[int], cards: Sequence[int]) -> int:
    """Mixed-radix index of an assignment, last variable fastest."""
    idx = 0
    for v, c in zip(values, cards):
        idx = idx * c + int(v)
    return idx


def assignment_of(index: int, cards: Sequence[int]) -> tuple[int, ...]:
    out = []
    for c in reversed(cards):
        index, v = divmod(index, c)
        out.append(v)
    return tuple(reversed(out))


def effects(model: FactoredMDP, action: ActionSpec | str) -> Scope:
    """Next-state variables whose CPD the action overrides."""
    if isinstance(action, str):
        action = model.action(action)
    elif action.id not in model.action_ids:
        raise KeyError(f"unknown action {action.id!r}")
    return tuple(sorted(action.overrides))


def action_cpd(model: FactoredMDP, action: ActionSpec | str, var: int) -> CPD:
    if isinstance(action, str):
        action = model.action(action)
    if not 0 <= var < model.n:
        raise KeyError(f"unknown variable {var}")
    return action.overrides.get(var, model.default[var])


def action_cpds(model: FactoredMDP, action: ActionSpec | str) -> tuple[CPD, ...]:
    """The full per-variable CPD view of one action's transition model."""
    if isinstance(action, str):
        action = model.action(action)
    return tuple(action_cpd(model, action, i) for i in range(model.n))


def uniform_weights(model: FactoredMDP) -> FactoredWeights:
    return FactoredWeights(
        tuple(Factor((i,), np.full(c, 1.0 / c)) for i, c in enumerate(model.cards))
    )


def single_cluster_weights(model: FactoredMDP, joint: np.ndarray) -> FactoredWeights:
    """Wrap an explicit joint distribution over all states as one cluster."""
    joint = np.asarray(joint, dtype=float).reshape(model.cards)
    return FactoredWeights((Factor(tuple(range(model.n)), joint),))


def _check_factor(path: str, f: Factor, cards: Sequence[int], out: list[Diagnostic]):
    n = len(cards)
    bad = [v for v in f.scope if not 0 <= v < n]
    if bad:
        out.append(Diagnostic(path, f"scope references unknown variables {bad}"))
        return
    expected = tuple(cards[v] for v in f.scope)
    if f.cards != expected:
        out.append(Diagnostic(path, f"table shape {f.cards} does not match cardinalities {expected}"))
    if not np.all(np.isfinite(f.values)):
        out.append(Diagnostic(path, "table has non-finite entries"))


def _check_cpd(path: str, cpd: CPD, child: int, cards: Sequence[int], out: list[Diagnostic]):
    n = len(cards)
    if cpd.child != child:
        out.append(Diagnostic(path, f"CPD child {cpd.child} stored under variable {child}"))
    if not 0 <= cpd.child < n:
        out.append(Diagnostic(path, f"child {cpd.child} is not a variable"))
        return
    bad = [p for p in cpd.parents if not 0 <= p < n]
    if bad:
        out.append(Diagnostic(path, f"parents reference unknown variables {bad}"))
        return
    expected = tuple(cards[p] for p in cpd.parents) + (cards[cpd.child],)
    if cpd.values.shape != expected:
        out.append(Diagnostic(path, f"table shape {cpd.values.shape} does not match {expected}"))
        return
    if not np.all(np.isfinite(cpd.values)):
        out.append(Diagnostic(path, "table has non-finite entries"))
        return
    rows = cpd.values.reshape(-1, expected[-1])
    if np.any(rows < 0):
        out.append(Diagnostic(path, "negative probability"))
    sums = rows.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(sums - 1.0) > NORM_TOL)
    if bad_rows.size:
        out.append(
            Diagnostic(path, f"row not normalized (rows {bad_rows.tolist()} sum to {sums[bad_rows].tolist()})")
        )


def validate(
    model: FactoredMDP,
    basis: Basis | None = None,
    weights: FactoredWeights | None = None,
) -> list[Diagnostic]:
    """Every violated invariant, one diagnostic each; empty when well formed."""
    out: list[Diagnostic] = []
    for i, v in enumerate(model.variables):
        if v.id != i:
            out.append(Diagnostic(f"variables[{i}].id", f"expected id {i}, got {v.id}"))
        if v.cardinality < 2:
            out.append(Diagnostic(f"variables[{i}].cardinality", "cardinality must be >= 2"))
    cards = model.cards

    if len(model.default) != model.n:
        out.append(
            Diagnostic("default", f"{len(model.default)} CPDs for {model.n} variables")
        )
    for i, cpd in enumerate(model.default):
        _check_cpd(f"default[{i}]", cpd, i, cards, out)

    if not model.actions:
        out.append(Diagnostic("actions", "at least one action is required"))
    seen: set[str] = set()
    for ai, a in enumerate(model.actions):
        if a.id in seen:
            out.append(Diagnostic(f"actions[{ai}].id", f"duplicate action id {a.id!r}"))
        seen.add(a.id)
        if model.default_is_action and a.id == DEFAULT_ACTION:
            out.append(
                Diagnostic(f"actions[{ai}].id", f"{DEFAULT_ACTION!r} is reserved for the executable default")
            )
        for var, cpd in a.overrides.items():
            _check_cpd(f"actions[{ai}].overrides[{var}]", cpd, var, cards, out)

    for ri, r in enumerate(model.rewards):
        _check_factor(f"rewards[{ri}]", r, cards, out)

    if not 0.0 < model.gamma < 1.0:
        out.append(Diagnostic("gamma", f"discount {model.gamma} not in (0, 1)"))

    if basis is not None:
        if basis.k < 1:
            out.append(Diagnostic("basis", "at least one basis function is required"))
        for j, h in enumerate(basis.functions):
            _check_factor(f"basis[{j}]", h, cards, out)
        if basis.coefficients is not None and not np.all(np.isfinite(basis.coefficients)):
            out.append(Diagnostic("coefficients", "non-finite coefficients"))

    if weights is not None:
        out.extend(validate_weights(weights, cards))
    return out


def validate_weights(weights: FactoredWeights, cards: Sequence[int]) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    owner: dict[int, int] = {}
    for ci, marg in enumerate(weights.clusters):
        path = f"weights.clusters[{ci}]"
        _check_factor(path, marg, cards, out)
        for v in marg.scope:
            if v in owner:
                out.append(
                    Diagnostic(path, f"clusters not disjoint: variable {v} also in cluster {owner[v]}")
                )
            owner.setdefault(v, ci)
        if np.any(marg.values < 0):
            out.append(Diagnostic(path, "negative weight"))
        total = float(marg.values.sum())
        if abs(total - 1.0) > NORM_TOL:
            out.append(Diagnostic(path, f"marginal not normalized (sums to {total})"))
    missing = sorted(set(range(len(cards))) - set(owner))
    if missing:
        out.append(Diagnostic("weights.clusters", f"clusters do not cover variables {missing}"))
    return out


def scope_union(*scopes: Iterable[int]) -> Scope:
    out: set[int] = set()
    for s in scopes:
        out.update(s)
    return tuple(sorted(out))
