"""Operations on restricted-scope functions.

Every operation here costs time exponential only in the scopes it touches,
never in the number of model variables. Results larger than ``TABLE_CAP``
entries are refused with :class:`TableTooLarge`.
"""

from __future__ import annotations

import contextlib
import contextvars
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import (
    CPD,
    Assignment,
    Basis,
    Factor,
    FactoredMDP,
    FactoredWeights,
    Scope,
    scope_union,
)

TABLE_CAP = 2**22


class TableTooLarge(ValueError):
    """An operation would build a table above the configured cap."""

    def __init__(self, size: int, cap: int, what: str = "table"):
        super().__init__(f"{what} would need {size} entries (cap {cap})")
        self.size = size
        self.cap = cap


_cap = contextvars.ContextVar("table_cap", default=TABLE_CAP)
_tracker: contextvars.ContextVar[list | None] = contextvars.ContextVar("table_tracker", default=None)


@contextlib.contextmanager
def table_cap(cap: int):
    token = _cap.set(int(cap))
    try:
        yield
    finally:
        _cap.reset(token)


@contextlib.contextmanager
def track_tables():
    """Record ``(operation, entries)`` for every table touched inside the block.

    Used to check structural-cost claims; yields the list being appended to.
    """
    log: list[tuple[str, int]] = []
    token = _tracker.set(log)
    try:
        yield log
    finally:
        _tracker.reset(token)


def _note(op: str, size: int):
    if size > _cap.get():
        raise TableTooLarge(size, _cap.get(), op)
    log = _tracker.get()
    if log is not None:
        log.append((op, size))


def domain_size(scope: Iterable[int], cards: Sequence[int]) -> int:
    total = 1
    for v in scope:
        total *= cards[v]
    return total


def expand(f: Factor, scope: Scope) -> np.ndarray:
    """View of ``f.values`` broadcastable against a table over ``scope``.

    ``scope`` must be a sorted superset of ``f.scope``.
    """
    shape = [1] * len(scope)
    pos = {v: i for i, v in enumerate(scope)}
    for v, c in zip(f.scope, f.cards):
        shape[pos[v]] = c
    return f.values.reshape(shape)


def extend(f: Factor, scope: Scope, cards: Sequence[int]) -> Factor:
    """``f`` as a (constant-along-new-axes) factor over a superset scope."""
    shape = tuple(cards[v] for v in scope)
    _note("extend", int(np.prod(shape, dtype=np.int64)))
    return Factor(scope, np.broadcast_to(expand(f, scope), shape))


def _union_shape(fs: Sequence[Factor]) -> tuple[Scope, tuple[int, ...]]:
    card: dict[int, int] = {}
    for f in fs:
        card.update(zip(f.scope, f.cards))
    scope = tuple(sorted(card))
    return scope, tuple(card[v] for v in scope)


def multiply(f: Factor, g: Factor, *more: Factor) -> Factor:
    fs = (f, g) + more
    scope, shape = _union_shape(fs)
    _note("multiply", int(np.prod(shape, dtype=np.int64)))
    out = expand(fs[0], scope)
    for h in fs[1:]:
        out = out * expand(h, scope)
    return Factor(scope, np.broadcast_to(out, shape))


def add(f: Factor, g: Factor, *more: Factor) -> Factor:
    fs = (f, g) + more
    scope, shape = _union_shape(fs)
    _note("add", int(np.prod(shape, dtype=np.int64)))
    out = np.zeros(shape)
    for h in fs:
        out = out + expand(h, scope)
    return Factor(scope, out)


def sum_factors(fs: Sequence[Factor]) -> Factor:
    if not fs:
        return Factor.constant(0.0)
    if len(fs) == 1:
        return fs[0]
    return add(*fs)


def sum_out(f: Factor, variables: Iterable[int]) -> Factor:
    drop = set(variables) & set(f.scope)
    if not drop:
        return f
    axes = tuple(i for i, v in enumerate(f.scope) if v in drop)
    keep = tuple(v for v in f.scope if v not in drop)
    return Factor(keep, f.values.sum(axis=axes))


def marginal_onto(f: Factor, scope: Iterable[int]) -> Factor:
    keep = set(scope)
    return sum_out(f, [v for v in f.scope if v not in keep])


def restrict(f: Factor, evidence: Mapping[int, int]) -> Factor:
    """Fix the evidence variables that appear in ``f``; drop those axes."""
    if not any(v in evidence for v in f.scope):
        return f
    index = tuple(evidence[v] if v in evidence else slice(None) for v in f.scope)
    keep = tuple(v for v in f.scope if v not in evidence)
    return Factor(keep, f.values[index])


def dot_product(f: Factor, g: Factor, model: FactoredMDP) -> float:
    """Sum over all states of f(x) g(x), using only the joint scope of f and g.

    The sum runs over Dom(W), W = scope(f) | scope(g), and is rescaled by
    |Dom(X)| / |Dom(W)| for the variables neither function mentions.
    """
    prod = multiply(f, g)
    rest = model.num_states // domain_size(prod.scope, model.cards)
    return float(prod.values.sum()) * float(rest)


def dot_terms(f: Factor, g: Factor) -> int:
    """Number of terms in the inner sum of :func:`dot_product`."""
    _, shape = _union_shape((f, g))
    return int(np.prod(shape, dtype=np.int64))


def weight_table(rho: FactoredWeights, scope: Scope) -> Factor:
    """The marginal of rho over ``scope`` (product of per-cluster marginals)."""
    parts = []
    wanted = set(scope)
    for marg in rho.clusters:
        overlap = wanted.intersection(marg.scope)
        if overlap:
            parts.append(marginal_onto(marg, overlap))
    if not parts:
        return Factor.constant(1.0)
    if len(parts) == 1:
        return parts[0]
    return multiply(*parts)


def weighted_dot_product(f: Factor, g: Factor, rho: FactoredWeights) -> float:
    """Sum over states of rho(x) f(x) g(x) for a cluster-factored rho."""
    prod = multiply(f, g)
    w = weight_table(rho, prod.scope)
    return float((prod.values * expand(w, prod.scope)).sum())


def weighted_sum(f: Factor, rho: FactoredWeights) -> float:
    """Expectation of ``f`` under rho."""
    w = weight_table(rho, f.scope)
    return float((f.values * expand(w, f.scope)).sum())


def backprojection_scope(scope: Iterable[int], cpds: Sequence[CPD]) -> Scope:
    """Current-time parents of the next-time copies of ``scope``."""
    return scope_union(*(cpds[v].parents for v in scope))


def back_project(f: Factor, cpds: Sequence[CPD]) -> Factor:
    """Expected value of f at the next step, as a function of the current state.

    ``cpds[v]`` is the CPD of X'_v under the transition model. The result is
    restricted to the parents of scope(f) and costs
    |Dom(parents)| * |Dom(scope(f))| operations.
    """
    if not f.scope:
        return f
    gamma_scope = backprojection_scope(f.scope, cpds)
    card: dict[int, int] = {}
    for v in f.scope:
        cpd = cpds[v]
        card.update(zip(cpd.parents, cpd.values.shape[:-1]))
    out_shape = tuple(card[v] for v in gamma_scope)
    out_size = int(np.prod(out_shape, dtype=np.int64))
    _note("back_project", out_size * f.size)

    # einsum labels: current-time variables first, then next-time copies.
    cur = {v: i for i, v in enumerate(gamma_scope)}
    nxt = {v: len(cur) + i for i, v in enumerate(f.scope)}
    operands: list = []
    for v in f.scope:
        cpd = cpds[v]
        operands += [cpd.values, [cur[p] for p in cpd.parents] + [nxt[v]]]
    operands += [f.values, [nxt[v] for v in f.scope]]
    values = np.einsum(*operands, [cur[v] for v in gamma_scope])
    return Factor(gamma_scope, np.asarray(values, dtype=float).reshape(out_shape))


def evaluate(
    terms: Sequence[Factor] | Basis,
    state: Sequence[int] | Assignment,
    weights: Sequence[float] | None = None,
) -> float:
    """Sum_j w_j f_j(state); a :class:`Basis` supplies its own coefficients."""
    if isinstance(terms, Basis):
        weights = terms.require_coefficients()
        terms = terms.functions
    if isinstance(state, Assignment):
        state = [state.as_dict()[v] for v in range(max(state.scope, default=-1) + 1)]
    if weights is None:
        return float(sum(f(state) for f in terms))
    return float(sum(w * f(state) for f, w in zip(terms, weights)))
