import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factored_pi.demos import chain4, dbn5
from factored_pi.model import Assignment, uniform_weights
from factored_pi.oracle import flatten, policy_actions, q_values, transition_matrix
from factored_pi.policy import (
    Conditional,
    DecisionListPolicy,
    apply_policy,
    catch_all,
    delta_function,
    extract_decision_list,
    list_size_bound,
)
from factored_pi.oracle import factor_vector
from factored_pi.value import evaluate_fixed_action

from helpers import random_instance


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.booleans())
def test_greedy_list_attains_max_q(seed, prune):
    inst = random_instance(seed)
    rng = np.random.default_rng(seed)
    w = rng.normal(size=inst.basis.k)
    fitted = inst.basis.with_coefficients(w)
    policy = extract_decision_list(inst.model, fitted, prune=prune)
    flat = inst.flat
    Q = q_values(flat, inst.A @ w)
    stack = np.stack([Q[a] for a in flat.actions])
    best = stack.max(axis=0)
    chosen = policy_actions(flat, policy)
    for s, a in enumerate(chosen):
        assert Q[a][s] >= best[s] - 1e-9 * max(1.0, abs(best[s]))
        top2 = np.sort(stack[:, s])[-2:] if len(flat.actions) > 1 else None
        if top2 is not None and top2[1] - top2[0] > 1e-9:
            assert flat.actions[int(np.argmax(stack[:, s]))] == a


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_delta_is_q_difference(seed):
    inst = random_instance(seed)
    m, flat = inst.model, inst.flat
    w = np.random.default_rng(seed).normal(size=inst.basis.k)
    fitted = inst.basis.with_coefficients(w)
    V = inst.A @ w
    Qd = flat.R + m.gamma * transition_matrix(m, None, flat.states) @ V
    Q = q_values(flat, V)
    for a in m.action_ids:
        delta = delta_function(m, fitted, a)
        assert np.allclose(factor_vector(delta.factor, flat.states), Q[a] - Qd, atol=1e-10)


def test_dbn5_list_has_18_conditionals_before_pruning():
    demo = dbn5()
    w = evaluate_fixed_action(demo.model, demo.basis, uniform_weights(demo.model), "a_1").w
    full = extract_decision_list(demo.model, demo.basis.with_coefficients(w), prune=False)
    assert len(full) == 18
    assert list_size_bound(demo.model, demo.basis) == 18
    assert full.fallback == "d"


def test_list_is_sorted_with_tie_breaks():
    demo = dbn5()
    w = evaluate_fixed_action(demo.model, demo.basis, uniform_weights(demo.model), "a_1").w
    conds = extract_decision_list(demo.model, demo.basis.with_coefficients(w), prune=False).conditionals
    keys = [(-c.delta, c.action, c.t.values) for c in conds]
    assert keys == sorted(keys)


def test_pruning_drops_only_negative_bonuses():
    demo = dbn5()
    w = evaluate_fixed_action(demo.model, demo.basis, uniform_weights(demo.model), "a_1").w
    fitted = demo.basis.with_coefficients(w)
    full = extract_decision_list(demo.model, fitted, prune=False)
    pruned = extract_decision_list(demo.model, fitted)
    assert pruned.conditionals == tuple(c for c in full.conditionals if c.delta >= 0)
    flat = flatten(demo.model)
    assert policy_actions(flat, pruned) == policy_actions(flat, full)


def test_apply_policy_first_match_and_fallback():
    t = Assignment((0,), (1,))
    pol = DecisionListPolicy((Conditional(t, "a", 1.0),), "d")
    assert apply_policy(pol, (1, 0)) == "a"
    assert apply_policy(pol, (0, 0)) == "d"
    with pytest.raises(ValueError):
        apply_policy(DecisionListPolicy((Conditional(t, "a", 1.0),)), (0, 0))


def test_structural_key_ignores_delta():
    t = Assignment((0,), (1,))
    a = DecisionListPolicy((Conditional(t, "a", 1.0),), "d")
    b = DecisionListPolicy((Conditional(t, "a", 2.0),), "d")
    assert a.key() == b.key()
    assert a.key() != DecisionListPolicy((Conditional(t, "a", 1.0),), None).key()


def test_render():
    demo = chain4()
    assert catch_all("R").render(demo.model) == "if true → R (δ=0)"
    pol = DecisionListPolicy((Conditional(Assignment((0,), (2,)), "L", 0.5),), "d")
    assert pol.render(demo.model) == "if X=2 → L (δ=0.5)\nelse → d"
