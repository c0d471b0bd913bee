import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factored_pi.elimination import (
    WidthExceeded,
    induced_width,
    max_sum,
    min_fill_order,
    sum_product,
)
from factored_pi.generators import random_factor
from factored_pi.oracle import enumerate_states, factor_vector


def _random_network(seed, n=6, m=5, integer=False):
    rng = np.random.default_rng(seed)
    cards = [int(c) for c in rng.integers(2, 4, size=n)]
    fs = []
    for _ in range(m):
        f = random_factor(rng, n, cards, 1, 3)
        if integer:
            f = type(f)(f.scope, np.round(f.values * 10))
        fs.append(f)
    return cards, fs


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_max_sum_matches_enumeration_exactly(seed):
    # integer tables so the comparison can be exact
    cards, fs = _random_network(seed, integer=True)
    S = enumerate_states(cards)
    total = sum(factor_vector(f, S) for f in fs)
    res = max_sum(fs, cards, variables=range(len(cards)))
    assert res.value == total.max()
    state = tuple(res.assignment[v] for v in range(len(cards)))
    assert sum(f(state) for f in fs) == res.value


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_sum_product_matches_enumeration(seed):
    cards, fs = _random_network(seed)
    S = enumerate_states(cards)
    prod = np.prod([factor_vector(f, S) for f in fs], axis=0)
    keep = (0, 2)
    got = sum_product(fs, keep, cards, over=range(len(cards)))
    dense = np.zeros([cards[v] for v in keep])
    for s, p in zip(S, prod):
        dense[tuple(s[v] for v in keep)] += p
    assert np.allclose(got.values, dense, rtol=1e-10, atol=1e-12)


def test_sum_product_scales_unmentioned_variables():
    f = sum_product([], (), [2, 3], over=(0, 1))
    assert float(f.values) == 6.0


def test_min_fill_prefers_no_fill_and_breaks_ties_by_id():
    # chain 0-1-2: eliminating an end adds no fill
    order = min_fill_order([(0, 1), (1, 2)], [0, 1, 2])
    assert order[0] == 0


def test_induced_width_of_chain_and_clique():
    assert induced_width([(0, 1), (1, 2), (2, 3)], [0, 1, 2, 3]) == 1
    scopes = [c for c in itertools.combinations(range(4), 2)]
    assert induced_width(scopes, [0, 1, 2, 3]) == 3


def test_width_cap_raises():
    fs = [random_factor(np.random.default_rng(0), 6, [2] * 6, 2, 2) for _ in range(1)]
    fs = [type(fs[0])(c, np.ones((2, 2))) for c in itertools.combinations(range(6), 2)]
    with pytest.raises(WidthExceeded) as info:
        max_sum(fs, [2] * 6, max_width=2)
    assert info.value.clique_size > 3
