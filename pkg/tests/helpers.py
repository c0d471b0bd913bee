"""Random instance builders shared by the property and acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from factored_pi.generators import random_basis, random_decision_list, random_model, random_weights
from factored_pi.model import Basis, FactoredMDP, FactoredWeights
from factored_pi.oracle import FlatMDP, basis_matrix, flatten, weights_vector
from factored_pi.policy import DecisionListPolicy


@dataclass
class Instance:
    model: FactoredMDP
    basis: Basis
    rho: FactoredWeights
    flat: FlatMDP
    weights: np.ndarray
    A: np.ndarray
    policy: DecisionListPolicy


def full_rank(A: np.ndarray, weights: np.ndarray) -> bool:
    """Oracle check that the basis is independent under the weights."""
    M = A.T @ (weights[:, None] * A)
    eig = np.linalg.eigvalsh((M + M.T) / 2)
    return eig[-1] > 0 and eig[0] > 1e-9 * eig[-1]


def random_instance(seed: int, max_n: int = 8, max_scope: int = 3, k_max: int = 6, **model_kw) -> Instance:
    """Draw until the basis is independent under the drawn weights."""
    rng = np.random.default_rng(seed)
    while True:
        model = random_model(rng, max_n=max_n, max_scope=max_scope, **model_kw)
        basis = random_basis(rng, model, k=int(rng.integers(1, k_max + 1)), max_scope=min(2, max_scope))
        rho = random_weights(rng, model)
        flat = flatten(model)
        weights = weights_vector(rho, flat.states)
        A = basis_matrix(basis, flat.states)
        if not full_rank(A, weights):
            continue
        policy = random_decision_list(rng, model, max_scope=max_scope)
        return Instance(model, basis, rho, flat, weights, A, policy)


def close(x, y, rtol: float = 1e-8) -> bool:
    """Relative agreement, with the scale taken from the larger operand."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    scale = max(1.0, float(np.abs(x).max(initial=0.0)), float(np.abs(y).max(initial=0.0)))
    return bool(np.all(np.abs(x - y) <= rtol * scale))
