"""Bucket elimination over small factors: sum-product and max-sum.

Orders come from the greedy min-fill heuristic (ties broken by the smallest
variable id). Both engines refuse to build a clique whose induced width
exceeds ``max_width``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .factors import _note
from .model import Factor, Scope

MAX_WIDTH = 20


class WidthExceeded(RuntimeError):
    def __init__(self, clique: Sequence[int], max_width: int):
        super().__init__(
            f"elimination clique of size {len(clique)} {tuple(clique)} exceeds width cap {max_width}"
        )
        self.clique_size = len(clique)
        self.clique = tuple(clique)


def interaction_graph(scopes: Iterable[Iterable[int]]) -> dict[int, set[int]]:
    graph: dict[int, set[int]] = {}
    for scope in scopes:
        scope = tuple(scope)
        for v in scope:
            graph.setdefault(v, set()).update(u for u in scope if u != v)
    return graph


def _fill(graph: dict[int, set[int]], v: int) -> int:
    nb = sorted(graph[v])
    return sum(1 for i, a in enumerate(nb) for b in nb[i + 1:] if b not in graph[a])


def min_fill_order(scopes: Iterable[Iterable[int]], eliminate: Iterable[int]) -> list[int]:
    """Greedy min-fill order over the variables in ``eliminate``."""
    graph = interaction_graph(scopes)
    todo = set(eliminate)
    for v in todo:
        graph.setdefault(v, set())
    order = []
    while todo:
        v = min(todo, key=lambda u: (_fill(graph, u), u))
        nb = graph.pop(v)
        for a in nb:
            graph[a].discard(v)
            graph[a].update(u for u in nb if u != a)
        todo.remove(v)
        order.append(v)
    return order


def induced_width(
    scopes: Iterable[Iterable[int]], order: Sequence[int], keep: Iterable[int] = ()
) -> int:
    """Largest clique minus one met while eliminating ``order``.

    The variables in ``keep`` survive elimination and form a final clique.
    """
    graph = interaction_graph(scopes)
    width = max(len(tuple(keep)) - 1, 0)
    for v in order:
        nb = graph.pop(v, set())
        width = max(width, len(nb))
        for a in nb:
            graph[a].discard(v)
            graph[a].update(u for u in nb if u != a)
    return width


# Internal factors are (scope, array) pairs; Factor construction is too slow
# for the inner loop.
_Raw = tuple[Scope, np.ndarray]


def _join(fs: Sequence[_Raw], combine) -> _Raw:
    card: dict[int, int] = {}
    for s, a in fs:
        card.update(zip(s, a.shape))
    scope = tuple(sorted(card))
    pos = {v: i for i, v in enumerate(scope)}
    out = None
    for s, a in fs:
        shape = [1] * len(scope)
        for v, c in zip(s, a.shape):
            shape[pos[v]] = c
        x = a.reshape(shape)
        out = x if out is None else combine(out, x)
    out = np.broadcast_to(out, tuple(card[v] for v in scope))
    _note("eliminate", out.size)
    return scope, out


def _check_width(scope: Scope, max_width: int):
    if len(scope) - 1 > max_width:
        raise WidthExceeded(scope, max_width)


def sum_product(
    factors: Sequence[Factor],
    keep: Iterable[int],
    cards: Sequence[int],
    over: Iterable[int] = (),
    order: Sequence[int] | None = None,
    max_width: int = MAX_WIDTH,
) -> Factor:
    """Sum the product of ``factors`` over every variable not in ``keep``.

    ``over`` lists extra variables summed out that may appear in no factor;
    each such variable multiplies the result by its cardinality. Variables of
    ``keep`` that no factor mentions are broadcast into the result.
    """
    keep = tuple(sorted(set(keep)))
    raw: list[_Raw] = [(f.scope, f.values) for f in factors]
    mentioned = set().union(*(s for s, _ in raw)) if raw else set()
    elim = sorted(mentioned - set(keep))
    scale = 1.0
    for v in set(over) - mentioned - set(keep):
        scale *= cards[v]
    if order is None:
        order = min_fill_order([s for s, _ in raw], elim)
    for v in order:
        bucket = [f for f in raw if v in f[0]]
        if not bucket:
            continue
        raw = [f for f in raw if v not in f[0]]
        scope, table = _join(bucket, np.multiply)
        _check_width(scope, max_width)
        ax = scope.index(v)
        raw.append((scope[:ax] + scope[ax + 1:], table.sum(axis=ax)))
    shape = tuple(cards[v] for v in keep)
    out = np.full(shape, scale)
    if raw:
        scope, table = _join(raw, np.multiply)
        _check_width(scope, max_width)
        pos = {v: i for i, v in enumerate(keep)}
        bshape = [1] * len(keep)
        for v, c in zip(scope, table.shape):
            bshape[pos[v]] = c
        out = out * table.reshape(bshape)
    return Factor(keep, out)


@dataclass
class MaxResult:
    value: float
    assignment: dict[int, int]
    width: int


def max_sum(
    factors: Sequence[Factor],
    cards: Sequence[int],
    variables: Iterable[int] = (),
    order: Sequence[int] | None = None,
    max_width: int = MAX_WIDTH,
) -> MaxResult:
    """Maximize the sum of ``factors`` over all their variables.

    Returns the maximum and a maximizing assignment recovered by traceback.
    Variables listed in ``variables`` but mentioned by no factor get value 0.
    """
    raw: list[_Raw] = [(f.scope, f.values) for f in factors]
    mentioned = set().union(*(s for s, _ in raw)) if raw else set()
    if order is None:
        order = min_fill_order([s for s, _ in raw], sorted(mentioned))
    trace: list[tuple[int, Scope, np.ndarray]] = []
    width = 0
    for v in order:
        bucket = [f for f in raw if v in f[0]]
        if not bucket:
            continue
        raw = [f for f in raw if v not in f[0]]
        scope, table = _join(bucket, np.add)
        _check_width(scope, max_width)
        width = max(width, len(scope) - 1)
        ax = scope.index(v)
        rest = scope[:ax] + scope[ax + 1:]
        trace.append((v, rest, np.argmax(table, axis=ax)))
        raw.append((rest, table.max(axis=ax)))
    value = float(sum(float(a) for _, a in raw))
    assignment = {v: 0 for v in variables}
    for v, rest, best in reversed(trace):
        assignment[v] = int(best[tuple(assignment[u] for u in rest)])
    return MaxResult(value, assignment, width)
