"""Policy iteration for factored MDPs with factored linear value functions."""

from .model import (
    CPD,
    DEFAULT_ACTION,
    ActionSpec,
    Assignment,
    Basis,
    Factor,
    FactoredMDP,
    FactoredWeights,
    VariableSpec,
    action_cpd,
    effects,
    uniform_weights,
    validate,
)
from .demos import build_demo
from .driver import RunConfig, RunTrace, run_policy_iteration
from .policy import DecisionListPolicy, apply_policy, extract_decision_list

__version__ = "0.1.0"
