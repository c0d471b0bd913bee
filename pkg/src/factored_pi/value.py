"""Closed-form weighted least-squares value determination.

For a policy with transition matrix P and projection weights rho, the
projected Bellman fixed point satisfies ``(M - gamma C) w = r`` where

    M[i, j] = (h_i . h_j)_rho
    C[i, j] = (h_i . P h_j)_rho
    r[i]    = (h_i . R)_rho

This works for any weights rho, not only the policy's stationary distribution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .factors import back_project, weighted_dot_product
from .model import Basis, Factor, FactoredMDP, FactoredWeights, action_cpds

PIVOT_TOL = 1e-12
COND_WARN = 1e12
PERTURB_STEPS = 8
PERTURB_BASE = 1e-6


class SingularSystem(np.linalg.LinAlgError):
    """The fixed-point system stayed singular after perturbing gamma."""


class DependentBasis(np.linalg.LinAlgError):
    """The basis is linearly dependent under the projection weights."""


class IllConditioned(UserWarning):
    pass


@dataclass(frozen=True)
class GramSystem:
    M: np.ndarray
    C: np.ndarray
    r: np.ndarray
    gamma: float

    @property
    def k(self) -> int:
        return self.r.size


@dataclass(frozen=True)
class Solution:
    w: np.ndarray
    gamma_used: float
    perturbed: bool
    residual: float


def gram_matrix(basis: Basis, rho: FactoredWeights) -> np.ndarray:
    hs = basis.functions
    k = len(hs)
    M = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            M[i, j] = M[j, i] = weighted_dot_product(hs[i], hs[j], rho)
    return M


def reward_vector(model: FactoredMDP, basis: Basis, rho: FactoredWeights) -> np.ndarray:
    return np.array(
        [sum(weighted_dot_product(h, R, rho) for R in model.rewards) for h in basis.functions]
    )


def backprojected_basis(model: FactoredMDP, basis: Basis, action: str) -> list[Factor]:
    cpds = action_cpds(model, action)
    return [back_project(h, cpds) for h in basis.functions]


def build_gram_fixed_action(
    model: FactoredMDP, basis: Basis, rho: FactoredWeights, action: str
) -> GramSystem:
    """The fixed-point system for the policy that always takes ``action``."""
    projected = backprojected_basis(model, basis, action)
    hs = basis.functions
    C = np.array([[weighted_dot_product(hi, phj, rho) for phj in projected] for hi in hs])
    return GramSystem(gram_matrix(basis, rho), C, reward_vector(model, basis, rho), model.gamma)


def _pivot_ratio(lu: np.ndarray) -> float:
    d = np.abs(np.diag(lu))
    top = d.max()
    return 0.0 if top == 0 else float(d.min() / top)


def check_basis(M: np.ndarray):
    eig = np.linalg.eigvalsh((M + M.T) / 2)
    top = eig[-1]
    if top <= 0 or eig[0] < PIVOT_TOL * top:
        raise DependentBasis(
            f"basis is linearly dependent under the weights (eigenvalues {eig[0]:.3g} .. {top:.3g})"
        )


def _gamma_ladder(gamma: float):
    yield gamma
    for t in range(PERTURB_STEPS // 2):
        for sign in (1.0, -1.0):
            g = gamma * (1.0 + sign * PERTURB_BASE * 2.0**t)
            if 0.0 < g < 1.0:
                yield g


def solve_fixed_point(system: GramSystem) -> Solution:
    """Solve ``(M - gamma C) w = r`` by LU with partial pivoting.

    A numerically singular matrix (smallest/largest pivot below 1e-12) is
    retried with gamma nudged by +-1e-6 * 2^t; the system is singular for at
    most finitely many gamma.
    """
    check_basis(system.M)
    for attempt, g in enumerate(_gamma_ladder(system.gamma)):
        A = system.M - g * system.C
        with warnings.catch_warnings():
            # exact singularity is detected by the pivot ratio below
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
        if _pivot_ratio(lu) < PIVOT_TOL:
            continue
        w = scipy.linalg.lu_solve((lu, piv), system.r)
        cond = np.linalg.cond(A)
        if cond > COND_WARN:
            warnings.warn(f"fixed-point system condition number {cond:.3g}", IllConditioned, stacklevel=2)
        residual = float(np.abs(A @ w - system.r).max())
        return Solution(w, g, attempt > 0, residual)
    raise SingularSystem(f"fixed-point system singular for gamma near {system.gamma}")


def fixed_point_gap(system: GramSystem, w: np.ndarray, gamma: float | None = None) -> float:
    """Max-norm of ``w - M^{-1}(gamma C w + r)``."""
    g = system.gamma if gamma is None else gamma
    target = np.linalg.solve(system.M, g * system.C @ w + system.r)
    return float(np.abs(w - target).max())


def projection(basis: Basis, rho: FactoredWeights, v: list[Factor]) -> np.ndarray:
    """Least-squares coefficients of the function ``sum(v)`` under rho."""
    M = gram_matrix(basis, rho)
    check_basis(M)
    b = np.array(
        [sum(weighted_dot_product(h, f, rho) for f in v) for h in basis.functions]
    )
    return np.linalg.solve(M, b)


def evaluate_fixed_action(
    model: FactoredMDP, basis: Basis, rho: FactoredWeights, action: str
) -> Solution:
    return solve_fixed_point(build_gram_fixed_action(model, basis, rho, action))
