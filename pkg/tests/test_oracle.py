import numpy as np
import pytest

from factored_pi.demos import chain4
from factored_pi.generators import random_model
from factored_pi.oracle import (
    NonUniqueStationary,
    StateSpaceTooLarge,
    enumerate_states,
    exact_policy_iteration,
    exact_policy_value,
    flatten,
    stationary_distribution,
    value_iteration,
)


def test_states_in_index_order():
    S = enumerate_states([2, 3])
    assert S.tolist()[:4] == [[0, 0], [0, 1], [0, 2], [1, 0]]


def test_cap():
    with pytest.raises(StateSpaceTooLarge):
        enumerate_states([2] * 25)


def test_transition_rows_sum_to_one():
    flat = flatten(random_model(np.random.default_rng(3), n=5))
    for P in flat.P.values():
        assert np.allclose(P.sum(axis=1), 1.0)


def test_policy_iteration_agrees_with_value_iteration():
    flat = flatten(random_model(np.random.default_rng(7), n=4, gamma=0.8))
    policy, V = exact_policy_iteration(flat)
    assert np.allclose(V, value_iteration(flat), atol=1e-9)
    assert np.allclose(exact_policy_value(flat, policy), V)


def test_chain4_exact_policy():
    flat = flatten(chain4().model)
    policy, _ = exact_policy_iteration(flat)
    assert "".join(policy) == "RRLL"


def test_chain4_stationary_distribution_is_birth_death_solution():
    rho = stationary_distribution(flatten(chain4().model), "R")
    assert np.allclose(rho, np.array([1, 9, 81, 729]) / 820, atol=1e-10)


def test_reducible_chain_rejected():
    flat = flatten(chain4().model)
    stay = flat.P["R"].copy()
    flat.P["R"][:] = np.eye(4)
    with pytest.raises(NonUniqueStationary):
        stationary_distribution(flat, "R")
    flat.P["R"][:] = stay
