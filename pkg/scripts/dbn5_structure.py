"""Structural sizes of the five-variable DBN example.

Reports back-projection domains |Dom(T_a)|, decision-list length with and
without pruning, the largest table built by the Gram pipelines, the induced
width of branch counting, and the policy-iteration outcome per discount.

    python3 scripts/dbn5_structure.py --gammas 0.5 0.7 0.9
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field

from factored_pi import RunConfig, run_policy_iteration
from factored_pi.demos import dbn5
from factored_pi.factors import dot_terms, track_tables
from factored_pi.listgram import branch_system, build_gram_decision_list, constraint_width
from factored_pi.model import uniform_weights
from factored_pi.policy import delta_function, extract_decision_list
from factored_pi.value import build_gram_fixed_action, evaluate_fixed_action


@dataclass
class Config:
    gammas: list[float] = field(default_factory=lambda: [0.5, 0.7, 0.9])
    start_action: str = "a_1"


def structure():
    demo = dbn5()
    m, basis, h = demo.model, demo.basis, demo.basis.functions
    rho = uniform_weights(m)
    print(f"dot product (h_1, h_2): {dot_terms(h[0], h[1])} terms")
    w = evaluate_fixed_action(m, basis, rho, "a_1").w
    fitted = basis.with_coefficients(w)
    for a in m.action_ids:
        print(f"  |Dom(T_{a})| = {delta_function(m, fitted, a).factor.size}")
    full = extract_decision_list(m, fitted, prune=False)
    pruned = extract_decision_list(m, fitted)
    print(f"decision list: {len(full)} conditionals ({len(pruned)} after pruning)")
    with track_tables() as log:
        for a in m.executable_actions():
            build_gram_fixed_action(m, basis, rho, a)
        build_gram_decision_list(m, basis, rho, full)
    print(f"largest table in the Gram pipelines: {max(s for _, s in log)}")
    width = max(
        constraint_width(
            branch_system(full, l, tuple(sorted(set(h[i].scope) | set(m.default[j].parents))), m.cards)
        )[0]
        for l in range(len(full.branches()))
        for i in range(basis.k)
        for j in range(basis.k)
    )
    print(f"branch-counting induced width: {width}")
    print(full.render(m, digits=4))


def run(cfg: Config):
    structure()
    for gamma in cfg.gammas:
        demo = dbn5(gamma)
        trace = run_policy_iteration(
            demo.model, demo.basis, RunConfig(error_mode="symmetric", start_action=cfg.start_action)
        )
        sizes = [len(r.greedy) for r in trace.records]
        last = trace.records[-1].bellman
        print(
            f"gamma {gamma}: {trace.status} after {len(trace.records)} iterations, list sizes {sizes}, "
            f"eps {last.epsilon:.4g}, loss bound {last.loss_bound:.4g}"
        )


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--gammas", type=float, nargs="+", default=Config().gammas)
    p.add_argument("--start-action", default="a_1")
    a = p.parse_args()
    run(Config(a.gammas, a.start_action))


if __name__ == "__main__":
    main()
