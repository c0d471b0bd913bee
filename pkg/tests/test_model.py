import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factored_pi.demos import chain4, dbn5
from factored_pi.model import (
    CPD,
    ActionSpec,
    Assignment,
    Basis,
    Factor,
    FactoredMDP,
    FactoredWeights,
    VariableSpec,
    action_cpd,
    assignment_of,
    effects,
    index_of,
    uniform_weights,
    validate,
)


def test_index_convention_last_variable_fastest():
    # scope [0, 2], cards (2, 3): X0=1, X2=2 -> 1*3 + 2
    assert index_of((1, 2), (2, 3)) == 5
    assert assignment_of(5, (2, 3)) == (1, 2)


@given(st.lists(st.integers(2, 4), min_size=1, max_size=5), st.data())
def test_index_roundtrip(cards, data):
    idx = data.draw(st.integers(0, int(np.prod(cards)) - 1))
    assert index_of(assignment_of(idx, cards), cards) == idx


def test_factor_from_table_matches_index():
    f = Factor.from_table((0, 2), (2, 3), list(range(6)))
    assert f((1, 9, 2)) == 5.0
    assert f.size == 6


def test_factor_rejects_unsorted_scope():
    with pytest.raises(ValueError):
        Factor((2, 0), np.zeros((2, 2)))


def test_factor_is_read_only():
    f = Factor((0,), [1.0, 2.0])
    with pytest.raises(ValueError):
        f.values[0] = 3.0


def test_assignment_consistency_and_conflict():
    t = Assignment((0, 2), (1, 0))
    assert t.consistent_with((1, 1, 0))
    assert not t.consistent_with((1, 1, 1))
    assert t.conflicts(Assignment((2,), (1,)))
    assert not t.conflicts(Assignment((1,), (1,)))


def test_effects_and_action_cpd():
    m = dbn5().model
    assert effects(m, "a_3") == (2,)
    assert effects(m, "d") == ()
    assert action_cpd(m, "a_3", 2) is m.action("a_3").overrides[2]
    assert action_cpd(m, "a_3", 1) is m.default[1]


def test_demos_validate_cleanly():
    for demo in (chain4(), dbn5()):
        assert validate(demo.model, demo.basis, uniform_weights(demo.model)) == []


def test_chain4_shape():
    m = chain4().model
    assert m.cards == (4,)
    assert m.action_ids == ("L", "R")
    assert list(m.rewards[0].values) == [0.0, 1.0, 1.0, 0.0]


def _tiny(**kw):
    cpd = CPD(0, (0,), [[0.9, 0.1], [0.2, 0.8]])
    args = dict(
        variables=(VariableSpec(0, "X", 2),),
        default=(cpd,),
        actions=(ActionSpec("a", {}),),
        rewards=(Factor((0,), [0.0, 1.0]),),
        gamma=0.9,
    )
    args.update(kw)
    return FactoredMDP(**args)


def test_validate_reports_unnormalized_row():
    bad = CPD(0, (0,), [[0.9, 0.2], [0.2, 0.8]])
    diags = validate(_tiny(default=(bad,)))
    assert len(diags) == 1 and diags[0].path == "default[0]"
    assert "normalized" in diags[0].message


def test_validate_reports_bad_gamma_and_duplicate_actions():
    m = _tiny(gamma=1.0, actions=(ActionSpec("a", {}), ActionSpec("a", {})))
    paths = {d.path for d in validate(m)}
    assert "gamma" in paths and "actions[1].id" in paths


def test_validate_reserves_default_id():
    m = _tiny(actions=(ActionSpec("d", {}),), default_is_action=True)
    assert any("reserved" in d.message for d in validate(m))


def test_validate_weights():
    m = _tiny()
    overlap = FactoredWeights((Factor((0,), [0.5, 0.5]), Factor((0,), [0.5, 0.5])))
    assert any("disjoint" in d.message for d in validate(m, weights=overlap))
    unnorm = FactoredWeights((Factor((0,), [0.5, 0.6]),))
    assert any("normalized" in d.message for d in validate(m, weights=unnorm))


def test_basis_coefficients():
    b = Basis((Factor.constant(1.0),))
    with pytest.raises(ValueError):
        b.require_coefficients()
    assert b.with_coefficients([2.0]).require_coefficients().tolist() == [2.0]
