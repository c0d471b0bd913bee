"""JSON model documents, policies, and reports.

Tables are flat arrays in mixed-radix order with the LAST scope variable
varying fastest. For a factor over scope [0, 2] with cardinalities (2, 3) the
entry for X0=1, X2=2 sits at index 1*3 + 2 = 5. A CPD table is laid out the
same way over its parents followed by the child, so each consecutive run of
cardinality(child) entries is one row P(X'_child | parents).
"""

from __future__ import annotations

import datetime
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .bounds import ErrorReport
from .model import (
    CPD,
    ActionSpec,
    Assignment,
    Basis,
    Diagnostic,
    Factor,
    FactoredMDP,
    FactoredWeights,
    VariableSpec,
)
from .policy import Conditional, DecisionListPolicy

REPORT_FORMAT = "factored-pi-report/1"
SIG_DIGITS = 12


class DocumentError(ValueError):
    """Malformed JSON or a document that does not match the schema."""


class DocumentInvalid(ValueError):
    """Well-formed document whose tables do not fit the declared model."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def load_schema(name: str) -> dict:
    text = resources.files("factored_pi").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def rnd(x: float) -> float:
    """Round to 12 significant digits (the report precision)."""
    x = float(x)
    if not math.isfinite(x):
        return x
    return float(f"{x:.{SIG_DIGITS}g}")


def _floats(arr, exact: bool = False) -> list[float]:
    """Flat list; ``exact`` keeps full precision (model documents round-trip bit for bit)."""
    vals = np.asarray(arr, dtype=float).ravel()
    return [float(v) for v in vals] if exact else [rnd(v) for v in vals]


@dataclass(frozen=True)
class ModelDocument:
    model: FactoredMDP
    basis: Basis
    weights: FactoredWeights | None = None
    name: str | None = None
    start_action: str | None = None


def parse_json(text: str, source: str = "<input>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _schema_check(doc, schema_name: str, source: str):
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise DocumentError(f"{source}: {path}: {e.message}")


def document_from_dict(doc: dict, source: str = "<input>") -> ModelDocument:
    _schema_check(doc, "model", source)
    variables = tuple(
        VariableSpec(i, v.get("name", f"X{i}"), int(v["cardinality"])) for i, v in enumerate(doc["variables"])
    )
    cards = [v.cardinality for v in variables]
    diags: list[Diagnostic] = []

    def build(path, fn, *args):
        try:
            return fn(*args)
        except (ValueError, IndexError) as exc:
            diags.append(Diagnostic(path, str(exc)))
            return None

    def in_range(path, ids):
        bad = [v for v in ids if not 0 <= v < len(cards)]
        if bad:
            diags.append(Diagnostic(path, f"unknown variables {bad}"))
        return not bad

    def cpd(path, obj):
        if not in_range(path, [obj["child"], *obj["parents"]]):
            return None
        return build(path, CPD.from_table, obj["child"], obj["parents"], cards, obj["table"])

    def factor(path, obj):
        if not in_range(path, obj["scope"]):
            return None
        return build(path, Factor.from_table, obj["scope"], [cards[v] for v in obj["scope"]], obj["table"])

    default_objs = sorted(enumerate(doc["default"]), key=lambda p: p[1]["child"])
    default = tuple(cpd(f"default[{i}]", o) for i, o in default_objs)
    actions = []
    for ai, a in enumerate(doc["actions"]):
        overrides = {}
        for oi, o in enumerate(a.get("overrides", [])):
            c = cpd(f"actions[{ai}].overrides[{oi}]", o)
            if c is not None:
                if c.child in overrides:
                    diags.append(Diagnostic(f"actions[{ai}].overrides[{oi}]", f"second override for variable {c.child}"))
                overrides[c.child] = c
        actions.append(ActionSpec(str(a["id"]), overrides))
    rewards = tuple(factor(f"rewards[{i}]", r) for i, r in enumerate(doc["rewards"]))
    functions = tuple(factor(f"basis[{i}]", h) for i, h in enumerate(doc["basis"]))
    weights = None
    if doc.get("weights") is not None:
        weights = FactoredWeights(
            tuple(factor(f"weights.clusters[{i}]", c) for i, c in enumerate(doc["weights"]["clusters"]))
        )
    coefficients = doc.get("coefficients")
    if coefficients is not None and len(coefficients) != len(functions):
        diags.append(Diagnostic("coefficients", f"{len(coefficients)} values for {len(functions)} basis functions"))
        coefficients = None
    if diags:
        raise DocumentInvalid(diags)
    model = FactoredMDP(
        variables, default, tuple(actions), rewards, float(doc["gamma"]), bool(doc.get("default_is_action", False))
    )
    return ModelDocument(model, Basis(functions, coefficients), weights, doc.get("name"), doc.get("start_action"))


def load_document(path: str | Path) -> ModelDocument:
    path = Path(path)
    return document_from_dict(parse_json(path.read_text(), str(path)), str(path))


def _cpd_json(c: CPD) -> dict:
    return {"child": c.child, "parents": list(c.parents), "table": _floats(c.values, exact=True)}


def factor_json(f: Factor, exact: bool = False) -> dict:
    return {"scope": list(f.scope), "table": _floats(f.values, exact)}


def weights_json(rho: FactoredWeights, exact: bool = False) -> dict:
    return {"clusters": [factor_json(c, exact) for c in rho.clusters]}


def weights_from_json(obj: dict, model: FactoredMDP) -> FactoredWeights:
    if "weights" in obj and "clusters" not in obj:
        obj = obj["weights"]
    return FactoredWeights(
        tuple(
            Factor.from_table(c["scope"], [model.cards[v] for v in c["scope"]], c["table"])
            for c in obj["clusters"]
        )
    )


def document_to_dict(doc: ModelDocument) -> dict:
    m = doc.model
    out: dict[str, Any] = {}
    if doc.name:
        out["name"] = doc.name
    out["variables"] = [{"name": v.name, "cardinality": v.cardinality} for v in m.variables]
    out["default"] = [_cpd_json(c) for c in m.default]
    out["actions"] = [
        {"id": a.id, "overrides": [_cpd_json(a.overrides[v]) for v in sorted(a.overrides)]} for a in m.actions
    ]
    out["default_is_action"] = m.default_is_action
    out["rewards"] = [factor_json(r, exact=True) for r in m.rewards]
    out["gamma"] = m.gamma
    out["basis"] = [factor_json(h, exact=True) for h in doc.basis.functions]
    if doc.weights is not None:
        out["weights"] = weights_json(doc.weights, exact=True)
    if doc.basis.coefficients is not None:
        out["coefficients"] = _floats(doc.basis.coefficients, exact=True)
    if doc.start_action:
        out["start_action"] = doc.start_action
    return out


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def policy_json(policy: DecisionListPolicy) -> dict:
    return {
        "conditionals": [
            {"scope": list(c.t.scope), "values": list(c.t.values), "action": c.action, "delta": rnd(c.delta)}
            for c in policy.conditionals
        ],
        "fallback": policy.fallback,
    }


def policy_from_json(obj: dict) -> DecisionListPolicy:
    if "decision_list" in obj and "conditionals" not in obj:
        obj = obj["decision_list"]
    conds = tuple(
        Conditional(Assignment(tuple(c["scope"]), tuple(c["values"])), str(c["action"]), float(c.get("delta", 0.0)))
        for c in obj["conditionals"]
    )
    return DecisionListPolicy(conds, obj.get("fallback"))


def error_json(rep: ErrorReport | None, model: FactoredMDP | None = None) -> dict | None:
    if rep is None:
        return None
    witness = None
    if rep.witness is not None:
        witness = {
            (model.var_name(v) if model else str(v)): int(x) for v, x in enumerate(rep.witness)
        }
    return {
        "epsilon": rnd(rep.epsilon),
        "loss_bound": rnd(rep.loss_bound),
        "direction": rep.direction,
        "witness": witness,
        "source": rep.source,
        "parts": {k: (rnd(v) if math.isfinite(v) else None) for k, v in rep.parts.items()},
    }


def solution_json(sol) -> dict:
    return {
        "coefficients": _floats(sol.w),
        "gamma_used": rnd(sol.gamma_used),
        "perturbed": bool(sol.perturbed),
        "residual": rnd(sol.residual),
    }


def model_summary(model: FactoredMDP) -> dict:
    return {
        "variables": [v.name for v in model.variables],
        "cardinalities": list(model.cards),
        "actions": list(model.action_ids),
        "default_is_action": model.default_is_action,
        "gamma": rnd(model.gamma),
    }


def new_report(command: str, model: FactoredMDP | None = None) -> dict:
    rep: dict[str, Any] = {"format": REPORT_FORMAT, "command": command, "status": "ok", "exit_code": 0}
    if model is not None:
        rep["model"] = model_summary(model)
    rep["timing"] = {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    return rep


def strip_timing(report: dict) -> dict:
    """The report without its (nondeterministic) timing block."""
    return {k: v for k, v in report.items() if k != "timing"}


def format_witness(rep: ErrorReport, model: FactoredMDP) -> str:
    return ", ".join(f"{model.var_name(v)}={x}" for v, x in enumerate(rep.witness or ()))
