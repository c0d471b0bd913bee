import numpy as np
import pytest

from factored_pi import RunConfig, run_policy_iteration
from factored_pi.demos import chain4, dbn5
from factored_pi.driver import (
    CONVERGED,
    FAILED,
    MAX_ITERATIONS,
    OSCILLATING,
    evaluate_policy,
    refine_weights,
)
from factored_pi.model import (
    CPD,
    ActionSpec,
    Basis,
    Factor,
    FactoredMDP,
    FactoredWeights,
    VariableSpec,
    uniform_weights,
)
from factored_pi.oracle import flatten, policy_string
from factored_pi.policy import catch_all
from factored_pi.value import evaluate_fixed_action

ADVERSARIAL = FactoredWeights((Factor((0,), [0.01, 0.01, 0.01, 0.97]),))


def _sequence(trace, flat):
    seq = [policy_string(flat, r.policy) for r in trace.records] + [policy_string(flat, trace.final_policy)]
    return [p for i, p in enumerate(seq) if i == 0 or p != seq[i - 1]]


def test_chain4_uniform_converges_to_rrll():
    demo = chain4()
    trace = run_policy_iteration(demo.model, demo.basis, RunConfig(start_action="R"))
    assert trace.status == CONVERGED
    assert _sequence(trace, flatten(demo.model)) == ["RRRR", "RLLL", "RRLL"]


def test_chain4_stationary_oscillates():
    demo = chain4()
    trace = run_policy_iteration(demo.model, demo.basis, RunConfig(weights="stationary", start_action="R"))
    assert trace.status == OSCILLATING and trace.cycle_length == 2
    flat = flatten(demo.model)
    assert {policy_string(flat, r.policy) for r in trace.records} == {"RRRR", "LLLL"}


def test_cycle_length_points_back_to_the_repeated_list():
    demo = chain4()
    trace = run_policy_iteration(demo.model, demo.basis, RunConfig(weights="stationary", start_action="R"))
    revisited = trace.records[-trace.cycle_length].policy
    assert trace.final_policy.key() == revisited.key()


def test_converged_means_last_two_lists_identical():
    demo = dbn5(gamma=0.7)
    trace = run_policy_iteration(demo.model, demo.basis)
    assert trace.status == CONVERGED
    assert trace.records[-1].policy.key() == trace.final_policy.key()


def test_single_action_model_converges_immediately():
    m = FactoredMDP(
        (VariableSpec(0, "X", 2),),
        (CPD(0, (0,), [[0.5, 0.5], [0.5, 0.5]]),),
        (ActionSpec("only", {}),),
        (Factor((0,), [0.0, 1.0]),),
        0.9,
    )
    trace = run_policy_iteration(m, Basis((Factor.constant(1.0), Factor((0,), [0.0, 1.0]))))
    assert trace.status == CONVERGED and len(trace.records) == 1


def test_iteration_limit():
    demo = chain4()
    trace = run_policy_iteration(demo.model, demo.basis, RunConfig(max_iterations=1, start_action="R"))
    assert trace.status == MAX_ITERATIONS and len(trace.records) == 1


def test_solver_error_recorded():
    demo = dbn5()
    trace = run_policy_iteration(demo.model, demo.basis, RunConfig(max_width=0))
    assert trace.status == FAILED
    assert "WidthExceeded" in trace.message


def test_config_rejects_zero_iterations():
    with pytest.raises(ValueError):
        RunConfig(max_iterations=0)


def test_path_consistency_on_demo():
    demo = dbn5()
    rho = uniform_weights(demo.model)
    fixed = evaluate_fixed_action(demo.model, demo.basis, rho, "a_2").w
    from factored_pi.listgram import solve_decision_list_policy

    listed = solve_decision_list_policy(demo.model, demo.basis, rho, catch_all("a_2")).w
    assert np.abs(fixed - listed).max() <= 1e-10
    assert np.array_equal(evaluate_policy(demo.model, demo.basis, rho, catch_all("a_2")).w, fixed)


def test_bounds_recorded_each_iteration():
    demo = dbn5()
    trace = run_policy_iteration(demo.model, demo.basis, RunConfig(error_mode="symmetric"))
    for rec in trace.records:
        assert rec.bellman.loss_bound == pytest.approx(2 * rec.bellman.epsilon / (1 - 0.9))
        assert rec.policy_error is not None


def test_refinement_noop_when_error_is_zero():
    demo = chain4()
    rho = uniform_weights(demo.model)
    config = RunConfig(weights=rho, error_mode="symmetric", refine_rounds=3, start_action="R")
    trace = run_policy_iteration(demo.model, demo.basis, config)
    # RRLL's value is a parabola, so the basis represents it exactly
    assert trace.refinements[0].error.epsilon < 1e-9
    assert len(trace.refinements) == 1
    assert trace.refinements[0].weights == rho


def test_one_refinement_round_boosts_the_witness():
    demo = chain4()
    config = RunConfig(
        weights=ADVERSARIAL, error_mode="symmetric", refine_rounds=1, max_iterations=1, start_action="R"
    )
    trace = run_policy_iteration(demo.model, demo.basis, config)
    first, second = trace.refinements
    x = first.error.witness[0]
    before = np.asarray(first.weights.clusters[0].values)
    after = np.asarray(second.weights.clusters[0].values)
    expect = before.copy()
    expect[x] *= 1.5
    assert np.allclose(after, expect / expect.sum(), rtol=0, atol=1e-15)


@pytest.mark.parametrize("mode", ["symmetric", "one-sided"])
def test_refinement_reduces_error_from_adversarial_weights(mode):
    demo = chain4()
    config = RunConfig(
        weights=ADVERSARIAL, error_mode=mode, refine_rounds=3, max_iterations=1, start_action="R"
    )
    trace = run_policy_iteration(demo.model, demo.basis, config)
    eps = [r.error.epsilon for r in trace.refinements]
    assert len(eps) == 4
    assert min(eps[1:]) < eps[0]


def test_refine_weights_returns_final_weights():
    demo = chain4()
    config = RunConfig(weights=ADVERSARIAL, error_mode="one-sided", refine_rounds=2, max_iterations=1, start_action="R")
    trace = run_policy_iteration(demo.model, demo.basis, RunConfig(weights=ADVERSARIAL, max_iterations=1, start_action="R"))
    rho, trace = refine_weights(demo.model, demo.basis, config, trace)
    assert rho == trace.refinements[-1].weights
