import math

import numpy as np
from hypothesis import given, settings, strategies as st

from factored_pi.bounds import (
    CostNetwork,
    bellman_error_greedy,
    bellman_error_policy,
    boost_witness,
    greedy_residual,
    maximize,
    policy_residual,
)
from factored_pi.demos import chain4, dbn5
from factored_pi.model import Assignment, Factor, FactoredWeights, uniform_weights
from factored_pi.oracle import (
    enumerate_states,
    exact_policy_iteration,
    factor_vector,
    flatten,
    greedy_residual_vector,
    policy_residual_vector,
    q_values,
)

from helpers import close, random_instance


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_greedy_error_matches_oracle(seed):
    inst = random_instance(seed)
    w = np.random.default_rng(seed).normal(size=inst.basis.k)
    fitted = inst.basis.with_coefficients(w)
    V = inst.A @ w
    Q = q_values(inst.flat, V)
    up = max((Q[a] - V).max() for a in inst.flat.actions)
    down = (-greedy_residual_vector(inst.flat, V)).max()
    one = bellman_error_greedy(inst.model, fitted, symmetric=False)
    sym = bellman_error_greedy(inst.model, fitted, symmetric=True)
    assert close(one.epsilon, up)
    assert close(sym.epsilon, max(up, down))
    # the witness attains the reported value
    assert close(abs(greedy_residual(inst.model, fitted, sym.witness)), sym.epsilon)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_policy_error_matches_oracle(seed):
    inst = random_instance(seed)
    w = np.random.default_rng(seed).normal(size=inst.basis.k)
    fitted = inst.basis.with_coefficients(w)
    resid = policy_residual_vector(inst.flat, inst.A @ w, inst.policy)
    one = bellman_error_policy(inst.model, fitted, inst.policy, symmetric=False)
    sym = bellman_error_policy(inst.model, fitted, inst.policy, symmetric=True)
    assert close(one.epsilon, resid.max())
    assert close(sym.epsilon, np.abs(resid).max())
    assert close(abs(policy_residual(inst.model, fitted, inst.policy, sym.witness)), sym.epsilon)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_constrained_maximize_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    cards = [2, 3, 2, 2]
    S = enumerate_states(cards)
    terms = []
    for _ in range(3):
        scope = tuple(sorted(rng.choice(4, size=2, replace=False).tolist()))
        terms.append(Factor(scope, rng.integers(-5, 6, size=[cards[v] for v in scope]).astype(float)))
    req = Assignment((0,), (int(rng.integers(2)),))
    forbid = Assignment((1, 2), (int(rng.integers(3)), int(rng.integers(2))))
    total = sum(factor_vector(f, S) for f in terms)
    mask = np.array([req.consistent_with(s) and not forbid.consistent_with(s) for s in S])
    val, state = maximize(CostNetwork(tuple(terms), (req,), (forbid,)), cards)
    assert val == total[mask].max()
    assert req.consistent_with(state) and not forbid.consistent_with(state)


def test_infeasible_network():
    t = Assignment((0,), (1,))
    val, state = maximize(CostNetwork((Factor((0,), [1.0, 2.0]),), (t,), (t,)), [2])
    assert val == -math.inf and state is None


def test_zero_coefficients_give_max_reward():
    demo = dbn5()
    rep = bellman_error_greedy(demo.model, demo.basis.with_coefficients(np.zeros(5)))
    assert rep.epsilon == 1.0
    assert math.isclose(rep.loss_bound, 2.0 / (1 - 0.9))


def test_exact_value_in_basis_has_zero_error():
    demo = chain4()
    flat = flatten(demo.model)
    _, V = exact_policy_iteration(flat)
    x = np.arange(4.0)
    w = np.linalg.lstsq(np.stack([np.ones(4), x, x**2], axis=1), V, rcond=None)[0]
    rep = bellman_error_greedy(demo.model, demo.basis.with_coefficients(w))
    assert rep.epsilon < 1e-9


def test_boost_witness_updates_only_witness_entries():
    rho = FactoredWeights((Factor((0,), [0.25] * 4),))
    out = boost_witness(rho, (2,), 0.5)
    vals = np.asarray(out.clusters[0].values)
    assert math.isclose(vals.sum(), 1.0)
    assert math.isclose(vals[2] / vals[0], 1.5)
    assert vals[0] == vals[1] == vals[3]
