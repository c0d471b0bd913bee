"""Command-line interface: ``factored-pi <command> ...``.

Exit codes: 0 success/converged, 1 validation diagnostics, 2 parse or usage
error, 3 oscillating, 4 iteration limit, 5 solver error, 6 elimination width
exceeded, 7 state space too large for the explicit oracle.

A model argument is a path to a model document or a built-in demo name
(chain4, dbn5).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .bounds import bellman_error_greedy, bellman_error_policy
from .demos import DEMOS, build_demo
from .driver import (
    CONVERGED,
    FAILED,
    MAX_ITERATIONS,
    OSCILLATING,
    RunConfig,
    evaluate_policy,
    resolve_weights,
    run_policy_iteration,
)
from .elimination import MAX_WIDTH, WidthExceeded
from .factors import TableTooLarge, dot_terms, track_tables
from .listgram import branch_system, constraint_width
from .model import FactoredMDP, validate
from .oracle import (
    STATE_CAP,
    StateSpaceTooLarge,
    exact_policy_iteration,
    exact_policy_value,
    flatten,
    greedy_residual_vector,
    policy_actions,
    policy_residual_vector,
    q_values,
    stationary_distribution,
)
from .policy import DecisionListPolicy, catch_all, extract_decision_list
from .value import build_gram_fixed_action

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_OSC, EXIT_MAXIT, EXIT_SOLVER, EXIT_WIDTH, EXIT_STATES = range(8)
STATUS_EXIT = {CONVERGED: EXIT_OK, OSCILLATING: EXIT_OSC, MAX_ITERATIONS: EXIT_MAXIT, FAILED: EXIT_SOLVER}
INDUCED_LIMIT = 256


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def load_model(arg: str) -> io.ModelDocument:
    path = Path(arg)
    if path.exists():
        return io.load_document(path)
    if arg in DEMOS:
        d = build_demo(arg)
        return io.ModelDocument(d.model, d.basis, None, d.name, d.start_action)
    raise CliError(EXIT_PARSE, f"{arg}: no such file or demo")


def _read_json(path: str):
    p = Path(path)
    return io.parse_json(p.read_text(), str(p))


def load_policy(choice: str, model: FactoredMDP, flat_ok: bool = False):
    """``fixed:A`` (decision list), ``fixed-string:...`` (per-state, oracle
    only), or a JSON file holding a decision list or a report with one."""
    if choice.startswith("fixed:"):
        action = choice[len("fixed:"):]
        model.action(action)
        return catch_all(action)
    if choice.startswith("fixed-string:"):
        if not flat_ok:
            raise CliError(EXIT_PARSE, "fixed-string policies are only accepted by the exact subcommands")
        body = choice[len("fixed-string:"):]
        return body.split(",") if "," in body else list(body)
    return io.policy_from_json(_read_json(choice))


def load_coefficients(path: str) -> np.ndarray:
    obj = _read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("coefficients") or obj.get("solution", {}).get("coefficients")
    if not isinstance(obj, list):
        raise CliError(EXIT_PARSE, f"{path}: no coefficient list found")
    return np.array(obj, dtype=float)


def weights_for(doc: io.ModelDocument, choice: str, oracle_cap: int):
    if choice == "uniform":
        return "uniform"
    if choice == "stationary-oracle":
        if doc.model.num_states > oracle_cap:
            raise StateSpaceTooLarge(f"{doc.model.num_states} states exceeds the oracle cap of {oracle_cap}")
        return "stationary"
    if choice == "model":
        if doc.weights is None:
            raise CliError(EXIT_PARSE, "model document has no weights")
        return doc.weights
    return io.weights_from_json(_read_json(choice), doc.model)


def induced(model: FactoredMDP, policy) -> list[str] | None:
    if model.num_states > INDUCED_LIMIT:
        return None
    return policy_actions(flatten(model, INDUCED_LIMIT), policy)


def emit(report: dict, args, text: str):
    io_out = io.dumps(report)
    json.loads(io_out)  # strict JSON
    if getattr(args, "out", None):
        Path(args.out).write_text(io_out)
    if getattr(args, "json", False):
        sys.stdout.write(io_out)
    elif text:
        print(text)


def _finish(report: dict, code: int, start: float) -> int:
    report["exit_code"] = code
    report["timing"]["total_seconds"] = time.perf_counter() - start
    return code


# ---- commands -------------------------------------------------------------


def cmd_validate(args) -> int:
    start = time.perf_counter()
    report = io.new_report("validate")
    try:
        doc = load_model(args.model)
    except io.DocumentInvalid as exc:
        report["status"] = "invalid"
        report["diagnostics"] = [{"path": d.path, "message": d.message} for d in exc.diagnostics]
        code = _finish(report, EXIT_INVALID, start)
        emit(report, args, "\n".join(str(d) for d in exc.diagnostics))
        return code
    report["model"] = io.model_summary(doc.model)
    diags = validate(doc.model, doc.basis, doc.weights)
    report["diagnostics"] = [{"path": d.path, "message": d.message} for d in diags]
    report["status"] = "invalid" if diags else "valid"
    code = _finish(report, EXIT_INVALID if diags else EXIT_OK, start)
    emit(report, args, "\n".join(str(d) for d in diags) if diags else "valid")
    return code


def _check_valid(doc: io.ModelDocument):
    diags = validate(doc.model, doc.basis, doc.weights)
    if diags:
        raise CliError(EXIT_INVALID, "\n".join(str(d) for d in diags))


def _trace_json(model, trace) -> list[dict]:
    out = []
    for rec in trace.records:
        item = {
            "iteration": rec.index,
            "policy": io.policy_json(rec.policy),
            "solution": io.solution_json(rec.solution),
            "greedy_size": len(rec.greedy),
        }
        labels = induced(model, rec.policy)
        if labels is not None:
            item["induced_policy"] = labels
        if rec.bellman is not None:
            item["bellman"] = io.error_json(rec.bellman, model)
            item["policy_error"] = io.error_json(rec.policy_error, model)
        out.append(item)
    return out


def cmd_solve(args) -> int:
    start = time.perf_counter()
    doc = load_model(args.model)
    _check_valid(doc)
    model = doc.model if args.gamma is None else doc.model.with_gamma(args.gamma)
    config = RunConfig(
        max_iterations=args.max_iter,
        weights=weights_for(doc, args.weights, args.oracle_cap),
        prune=args.prune,
        error_mode=("symmetric" if args.symmetric else "one-sided") if args.bounds or args.refine else None,
        refine_rounds=args.refine,
        start_action=args.start or doc.start_action,
        seed=args.seed,
        max_width=args.max_width,
        oracle_cap=args.oracle_cap,
    )
    trace = run_policy_iteration(model, doc.basis, config)
    report = io.new_report("solve", model)
    report["status"] = trace.status
    report["config"] = {
        "max_iterations": config.max_iterations,
        "weights": args.weights,
        "prune": config.prune,
        "error_mode": config.error_mode,
        "refine_rounds": config.refine_rounds,
        "start_action": config.start_action or model.actions[0].id,
        "seed": config.seed,
    }
    if trace.message:
        report["message"] = trace.message
    report["trace"] = _trace_json(model, trace)
    report["timing"]["iterations"] = [rec.wall_time for rec in trace.records]
    lines = []
    if trace.records:
        last = trace.records[-1]
        report["coefficients"] = io.solution_json(last.solution)["coefficients"]
        report["decision_list"] = io.policy_json(trace.final_policy)
        labels = induced(model, trace.final_policy)
        if labels is not None:
            report["induced_policy"] = labels
        if last.bellman is not None:
            report["error"] = io.error_json(last.bellman, model)
            report["policy_error"] = io.error_json(last.policy_error, model)
        for rec in trace.records:
            lab = induced(model, rec.policy)
            desc = "".join(lab) if lab and all(len(a) == 1 for a in lab) else f"{len(rec.policy)} conditionals"
            lines.append(f"iteration {rec.index}: policy {desc} -> w = {np.array2string(rec.w, precision=6)}")
        if labels is not None and all(len(a) == 1 for a in labels):
            lines.append(f"final greedy policy: {''.join(labels)}")
        lines.append(f"decision list: {len(trace.final_policy)} conditionals")
        lines.append(trace.final_policy.render(model))
        if last.bellman is not None:
            lines.append(
                f"bellman error eps = {last.bellman.epsilon:.12g} at {io.format_witness(last.bellman, model)}; "
                f"loss bound 2 eps/(1-gamma) = {last.bellman.loss_bound:.12g}"
            )
    report["cycle_length"] = trace.cycle_length
    if trace.refinements:
        report["refinements"] = [
            {
                "round": r.round,
                "weights": io.weights_json(r.weights),
                "solution": io.solution_json(r.solution),
                "error": io.error_json(r.error, model),
            }
            for r in trace.refinements
        ]
        lines += [f"refinement {r.round}: eps = {r.error.epsilon:.12g}" for r in trace.refinements]
    status = trace.status + (f" (cycle length {trace.cycle_length})" if trace.cycle_length else "")
    lines.append(f"status: {status}" + (f" - {trace.message}" if trace.message else ""))
    code = STATUS_EXIT[trace.status]
    if trace.status == FAILED and ("WidthExceeded" in trace.message):
        code = EXIT_WIDTH
    _finish(report, code, start)
    emit(report, args, "\n".join(lines))
    return code


def cmd_evaluate(args) -> int:
    start = time.perf_counter()
    doc = load_model(args.model)
    _check_valid(doc)
    model = doc.model
    policy = load_policy(args.policy, model)
    config = RunConfig(weights=weights_for(doc, args.weights, args.oracle_cap), max_width=args.max_width)
    rho = resolve_weights(model, config, policy)
    sol = evaluate_policy(model, doc.basis, rho, policy, args.max_width)
    report = io.new_report("evaluate", model)
    report["solution"] = io.solution_json(sol)
    report["coefficients"] = report["solution"]["coefficients"]
    report["decision_list"] = io.policy_json(policy)
    _finish(report, EXIT_OK, start)
    emit(
        report,
        args,
        f"w = {' '.join(f'{x:.12g}' for x in sol.w)}\nfixed-point residual = {sol.residual:.12g}"
        + (f" (gamma perturbed to {sol.gamma_used:.12g})" if sol.perturbed else ""),
    )
    return EXIT_OK


def cmd_bellman(args) -> int:
    start = time.perf_counter()
    doc = load_model(args.model)
    _check_valid(doc)
    model = doc.model
    basis = doc.basis.with_coefficients(load_coefficients(args.coefficients))
    report = io.new_report("bellman-error", model)
    if args.policy:
        rep = bellman_error_policy(model, basis, load_policy(args.policy, model), args.symmetric, args.max_width)
    else:
        rep = bellman_error_greedy(model, basis, args.symmetric, args.max_width)
    report["error"] = io.error_json(rep, model)
    _finish(report, EXIT_OK, start)
    emit(
        report,
        args,
        f"epsilon = {rep.epsilon:.12g} ({rep.direction}) at {io.format_witness(rep, model)}\n"
        f"loss bound = {rep.loss_bound:.12g}",
    )
    return EXIT_OK


def cmd_exact(args) -> int:
    start = time.perf_counter()
    doc = load_model(args.model)
    _check_valid(doc)
    model = doc.model
    flat = flatten(model, args.oracle_cap)
    report = io.new_report(f"exact {args.what}", model)
    text = ""
    if args.what == "solve":
        policy, V = exact_policy_iteration(flat)
        report["policy"] = policy
        report["values"] = [io.rnd(v) for v in V]
        joined = "".join(policy) if all(len(a) == 1 for a in policy) else ",".join(policy)
        text = f"optimal policy: {joined}\nV* = {' '.join(f'{v:.12g}' for v in V)}"
    elif args.what == "value":
        policy = load_policy(args.policy, model, flat_ok=True)
        V = exact_policy_value(flat, policy)
        report["policy"] = policy_actions(flat, policy)
        report["values"] = [io.rnd(v) for v in V]
        text = f"V = {' '.join(f'{v:.12g}' for v in V)}"
    elif args.what == "stationary":
        policy = load_policy(args.policy, model, flat_ok=True)
        rho = stationary_distribution(flat, policy)
        report["policy"] = policy_actions(flat, policy)
        report["distribution"] = [io.rnd(v) for v in rho]
        text = f"stationary distribution: {' '.join(f'{v:.12g}' for v in rho)}"
    else:
        from .bounds import ErrorReport, ONE_SIDED, SYMMETRIC

        w = load_coefficients(args.coefficients)
        from .oracle import basis_matrix

        V = basis_matrix(doc.basis, flat.states) @ w
        if args.policy:
            policy = load_policy(args.policy, model, flat_ok=True)
            resid = policy_residual_vector(flat, V, policy)
            up, down = resid.max(), (-resid).max()
        else:
            resid = greedy_residual_vector(flat, V)
            Q = q_values(flat, V)
            up = max((Q[a] - V).max() for a in flat.actions)
            down = (-resid).max()
        eps, vec = (max(up, down), np.abs(resid)) if args.symmetric else (up, resid)
        s = int(np.argmax(vec)) if args.policy or args.symmetric else int(np.argmax(resid))
        rep = ErrorReport(
            float(eps),
            tuple(int(x) for x in flat.states[s]),
            2 * float(eps) / (1 - model.gamma),
            SYMMETRIC if args.symmetric else ONE_SIDED,
            "explicit enumeration",
            {"above": float(up), "below": float(down)} if args.symmetric else {"above": float(up)},
        )
        report["error"] = io.error_json(rep, model)
        text = f"epsilon = {rep.epsilon:.12g} ({rep.direction}) at {io.format_witness(rep, model)}\nloss bound = {rep.loss_bound:.12g}"
    _finish(report, EXIT_OK, start)
    emit(report, args, text)
    return EXIT_OK


def _chain4_demo(demo, report, lines):
    model, basis = demo.model, demo.basis
    flat = flatten(model)
    checkpoints = {}
    for mode, label in (("uniform", "uniform weights"), ("stationary", "stationary weights")):
        trace = run_policy_iteration(model, basis, RunConfig(weights=mode, start_action=demo.start_action))
        induced_seq = ["".join(policy_actions(flat, r.policy)) for r in trace.records]
        induced_seq.append("".join(policy_actions(flat, trace.final_policy)))
        # consecutive lists can differ in ordering yet induce the same policy
        seq = [p for i, p in enumerate(induced_seq) if i == 0 or p != induced_seq[i - 1]]
        checkpoints[mode] = {
            "sequence": seq,
            "iterations": len(trace.records),
            "status": trace.status,
            "cycle_length": trace.cycle_length,
        }
        tail = f", cycle length {trace.cycle_length}" if trace.cycle_length else ""
        lines.append(
            f"{label}: {' -> '.join(seq)}  [{trace.status} after {len(trace.records)} iterations{tail}]"
        )
    policy, V = exact_policy_iteration(flat)
    checkpoints["exact"] = "".join(policy)
    lines.append(f"exact policy iteration: {''.join(policy)}")
    rho = stationary_distribution(flat, "R")
    checkpoints["stationary_RRRR"] = [io.rnd(x) for x in rho]
    lines.append(f"stationary distribution of RRRR: {' '.join(f'{x:.5f}' for x in rho)}")
    report["checkpoints"] = checkpoints


def _dbn5_demo(demo, report, lines):
    model, basis = demo.model, demo.basis
    h = basis.functions
    terms = dot_terms(h[0], h[1])
    lines.append(f"dot product (h_1 . h_2): {terms} terms in the inner sum")
    with track_tables() as log:
        build_gram_fixed_action(model, basis, resolve_weights(model, RunConfig(), None), "a_1")
    cost = max(size for _, size in log)
    lines.append(f"structural cost (largest table in the Gram pipeline): {cost}")
    trace = run_policy_iteration(model, basis, RunConfig(error_mode="symmetric", start_action=demo.start_action))
    first = trace.records[0]
    full = extract_decision_list(model, basis.with_coefficients(first.w), prune=False)
    lines.append(f"decision list: {len(full)} conditionals")
    width = 0
    for l in range(len(full.branches())):
        for i in range(basis.k):
            for j in range(basis.k):
                probe = tuple(sorted(set(h[i].scope) | set(model.default[j].parents)))
                width = max(width, constraint_width(branch_system(full, l, probe, model.cards))[0])
    lines.append(f"branch-counting induced width: {width}")
    lines.append(f"policy iteration: {trace.status}" + (f" (cycle length {trace.cycle_length})" if trace.cycle_length else ""))
    last = trace.records[-1]
    lines.append(f"final bellman error {last.bellman.epsilon:.6g}, loss bound {last.bellman.loss_bound:.6g}")
    report["checkpoints"] = {
        "dot_terms": terms,
        "conditionals": len(full),
        "structural_cost": cost,
        "induced_width": width,
        "status": trace.status,
    }


def cmd_demo(args) -> int:
    start = time.perf_counter()
    demo = build_demo(args.name)
    report = io.new_report(f"demo {args.name}", demo.model)
    lines: list[str] = []
    if args.export:
        doc = io.ModelDocument(demo.model, demo.basis, None, demo.name, demo.start_action)
        Path(args.export).write_text(io.dumps(io.document_to_dict(doc)))
        lines.append(f"wrote {args.export}")
    if args.name == "chain4":
        _chain4_demo(demo, report, lines)
    else:
        _dbn5_demo(demo, report, lines)
    _finish(report, EXIT_OK, start)
    emit(report, args, "\n".join(lines))
    return EXIT_OK


# ---- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="factored-pi", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("model", help="model document path or demo name")
        sp.add_argument("--out", help="write the JSON report here")
        sp.add_argument("--json", action="store_true", help="print the JSON report instead of text")
        sp.add_argument("--max-width", type=int, default=MAX_WIDTH, help="elimination width cap")
        sp.add_argument("--oracle-cap", type=int, default=STATE_CAP, help="explicit-state size cap")

    sp = sub.add_parser("validate", help="check a model document")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    weights_help = (
        "uniform, model (weights in the document), a weights JSON file, or stationary-oracle: "
        "the current policy's stationary distribution computed by explicit enumeration. "
        "stationary-oracle only exists to reproduce the failure mode of stationary weighting "
        "and is limited to small models"
    )
    sp = sub.add_parser("solve", help="approximate policy iteration")
    common(sp)
    sp.add_argument("--weights", default="uniform", help=weights_help)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--max-iter", type=int, default=50)
    sp.add_argument("--prune", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--bounds", action="store_true", help="compute Bellman error bounds each iteration")
    sp.add_argument("--symmetric", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--refine", type=int, default=0, metavar="R", help="weight-refinement rounds")
    sp.add_argument("--start", help="start action (default: first action)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("evaluate", help="value determination for one policy")
    common(sp)
    sp.add_argument("--policy", required=True, help="fixed:ACTION or a decision-list JSON file")
    sp.add_argument("--weights", default="uniform", help=weights_help)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("bellman-error", help="max-norm Bellman error of given coefficients")
    common(sp)
    sp.add_argument("--coefficients", required=True)
    sp.add_argument("--policy", help="evaluate against this decision list instead of the greedy backup")
    sp.add_argument("--symmetric", action=argparse.BooleanOptionalAction, default=True)
    sp.set_defaults(func=cmd_bellman)

    sp = sub.add_parser("exact", help="explicit-state oracle computations")
    sp.add_argument("model", help="model document path or demo name")
    esub = sp.add_subparsers(dest="what", required=True)
    common(esub.add_parser("solve"), model=False)
    for name in ("value", "stationary"):
        e = esub.add_parser(name)
        common(e, model=False)
        e.add_argument("--policy", required=True, help="fixed:A, fixed-string:RRLL or a decision-list file")
    e = esub.add_parser("bellman-error")
    common(e, model=False)
    e.add_argument("--coefficients", required=True)
    e.add_argument("--policy")
    e.add_argument("--symmetric", action=argparse.BooleanOptionalAction, default=True)
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("demo", help="run a built-in example")
    sp.add_argument("name", choices=sorted(DEMOS))
    sp.add_argument("--export", help="write the demo model document here")
    sp.add_argument("--out")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_demo)
    return p


EXACT_ACTIONS = ("solve", "value", "stationary", "bellman-error")


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # accept both "exact MODEL ACTION" and "exact ACTION MODEL"
    if len(argv) >= 3 and argv[0] == "exact" and argv[1] in EXACT_ACTIONS and not Path(argv[1]).exists():
        argv[1], argv[2] = argv[2], argv[1]
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except io.DocumentInvalid as exc:
        print("\n".join(str(d) for d in exc.diagnostics), file=sys.stderr)
        return EXIT_INVALID
    except (io.DocumentError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except StateSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATES
    except WidthExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WIDTH
    except (TableTooLarge, ArithmeticError, np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
