import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factored_pi.demos import dbn5
from factored_pi.factors import (
    TableTooLarge,
    add,
    back_project,
    dot_product,
    dot_terms,
    marginal_onto,
    multiply,
    restrict,
    sum_out,
    table_cap,
    track_tables,
    weighted_dot_product,
)
from factored_pi.generators import random_factor
from factored_pi.model import Factor, action_cpds
from factored_pi.oracle import factor_vector, transition_matrix, weights_vector

from helpers import close, random_instance

seeds = st.integers(0, 2**31 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_algebra_matches_dense_vectors(seed):
    inst = random_instance(seed, max_n=6)
    rng = np.random.default_rng(seed)
    m, S = inst.model, inst.flat.states
    f = random_factor(rng, m.n, m.cards, 0, 3)
    g = random_factor(rng, m.n, m.cards, 0, 3)
    fv, gv = factor_vector(f, S), factor_vector(g, S)
    assert close(factor_vector(multiply(f, g), S), fv * gv)
    assert close(factor_vector(add(f, g), S), fv + gv)
    assert close(dot_product(f, g, m), fv @ gv)
    assert close(weighted_dot_product(f, g, inst.rho), fv @ (inst.weights * gv))
    if f.scope:
        v = f.scope[0]
        # summing out v then broadcasting equals summing v's copies
        summed = factor_vector(sum_out(f, [v]), S) * 1.0
        dense = sum(factor_vector(restrict(f, {v: x}), S) for x in range(m.cards[v]))
        assert close(summed, dense)
        assert marginal_onto(f, f.scope).same_as(f)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_back_projection_matches_transition_matrix(seed):
    inst = random_instance(seed, max_n=6)
    m, S = inst.model, inst.flat.states
    for a in m.action_ids:
        P = transition_matrix(m, a, S)
        for h in inst.basis.functions:
            got = factor_vector(back_project(h, action_cpds(m, a)), S)
            assert close(got, P @ factor_vector(h, S))


def test_dot_product_terms_dbn5():
    h = dbn5().basis.functions
    assert dot_terms(h[0], h[1]) == 4


def test_dot_product_scales_by_missing_domain():
    m = dbn5().model
    f = Factor((0,), [1.0, 2.0])
    g = Factor((1,), [3.0, 5.0])
    # every one of the 8 assignments to X_3..X_5 repeats the 4-term sum
    assert dot_product(f, g, m) == 8 * (1 + 2) * (3 + 5)


def test_backprojection_domains_dbn5():
    demo = dbn5()
    m, h = demo.model, demo.basis.functions
    sizes = [back_project(h[i], action_cpds(m, f"a_{i + 1}")).size for i in range(5)]
    assert sizes == [2, 4, 4, 4, 4]


def test_table_cap_and_tracking():
    f = Factor((0, 1), np.ones((2, 2)))
    g = Factor((2, 3), np.ones((2, 2)))
    with track_tables() as log:
        multiply(f, g)
    assert ("multiply", 16) in log
    with table_cap(8), pytest.raises(TableTooLarge):
        multiply(f, g)
