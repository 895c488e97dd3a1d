"""Augmented Lagrange multiplier solver for robust matrix completion.

Solves::

    minimize  ||L||_* + lam * ||C||_{1,2}
    s.t.      P_Omega(L + C) = P_Omega(M)

with an auxiliary ``E`` that soaks up the unobserved entries, plus the
entry-sparse (``||C||_1``) baseline and plain nuclear-norm completion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, column_norms, norm
from .operators import ColumnSet, ObservationMask, project_columns, shrink_columns, shrink_entries, shrink_singular

MODES = ("column_sparse", "entry_sparse", "completion_only")


@dataclass(frozen=True)
class SolverConfig:
    """ALM hyperparameters.

    ``u0=None`` picks ``1 / ||M_obs||_{1,2}``.  ``support_threshold=None``
    means ``1e-6 * ||M_obs||_F / sqrt(n)`` when extracting the corrupted set.
    """

    lam: float = 1.0
    u0: float | None = None
    alpha: float = 1.1
    tol: float = 1e-6
    max_iter: int = 500
    mode: str = "column_sparse"
    support_threshold: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.u0 is not None and not self.u0 > 0:
            raise ValueError("u0 must be positive")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.support_threshold is not None and self.support_threshold < 0:
            raise ValueError("support_threshold must be nonnegative")


@dataclass
class SolverResult:
    L_star: np.ndarray
    C_star: np.ndarray
    E: np.ndarray
    Y: np.ndarray
    iterations: int
    residual_trace: list[float] = field(default_factory=list)
    converged: bool = False
    support_threshold: float = 0.0

    def objective(self, lam: float, mode: str = "column_sparse") -> float:
        return objective(self.L_star, self.C_star, lam, mode)


@dataclass(frozen=True)
class RecoveredSolution:
    L_prime: np.ndarray
    I_prime: ColumnSet


def objective(L, C, lam: float, mode: str = "column_sparse") -> float:
    if mode == "entry_sparse":
        return norm(L, "nuclear") + lam * float(np.abs(C).sum())
    return norm(L, "nuclear") + lam * norm(C, "one_two")


def default_support_threshold(M_obs) -> float:
    M_obs = np.asarray(M_obs)
    return 1e-6 * norm(M_obs, "frobenius") / math.sqrt(M_obs.shape[1])


def solve(M_obs, omega: ObservationMask, cfg: SolverConfig) -> SolverResult:
    """Run the ALM iteration until the relative feasibility residual drops below ``cfg.tol``.

    Non-convergence within ``cfg.max_iter`` is reported through
    ``converged=False``, not raised.  SVD failures propagate.
    """
    M = as_matrix(M_obs)
    if M.shape != omega.shape:
        raise ValueError(f"data {M.shape} and mask {omega.shape} differ in shape")
    unobserved = ~omega.array
    if np.any(M[unobserved] != 0):
        raise ValueError("M_obs must be zero outside the observed entries")

    threshold = cfg.support_threshold if cfg.support_threshold is not None else default_support_threshold(M)
    zeros = np.zeros_like(M)
    m_fro = norm(M, "frobenius")
    if m_fro == 0:
        return SolverResult(zeros, zeros.copy(), zeros.copy(), zeros.copy(), 1, [0.0], True, threshold)

    u = cfg.u0 if cfg.u0 is not None else 1.0 / norm(M, "one_two")
    lam = cfg.lam
    L = np.zeros_like(M)
    C = np.zeros_like(M)
    E = np.zeros_like(M)
    Y = np.zeros_like(M)
    trace: list[float] = []
    converged = False
    k = 0
    while k < cfg.max_iter:
        inv_u = 1.0 / u
        L = shrink_singular(M - E - C + inv_u * Y, inv_u)
        if cfg.mode == "column_sparse":
            C = shrink_columns(M - E - L + inv_u * Y, lam * inv_u)
        elif cfg.mode == "entry_sparse":
            C = shrink_entries(M - E - L + inv_u * Y, lam * inv_u)
        E = np.where(unobserved, M - L - C + inv_u * Y, 0.0)
        R = M - E - L - C
        Y = Y + u * R
        u *= cfg.alpha
        k += 1
        res = float(np.sqrt(np.sum(R * R))) / m_fro
        trace.append(res)
        if res <= cfg.tol:
            converged = True
            break
    return SolverResult(L, C, E, Y, k, trace, converged, threshold)


def extract_solution(res: SolverResult, threshold: float | None = None) -> RecoveredSolution:
    """Columns of ``C*`` with l2 norm above ``threshold`` form the corrupted set;
    ``L'`` is ``L*`` with those columns zeroed."""
    if threshold is None:
        threshold = res.support_threshold
    n = res.C_star.shape[1]
    cols = np.flatnonzero(column_norms(res.C_star) > threshold)
    I_prime = ColumnSet(n, tuple(int(j) for j in cols))
    return RecoveredSolution(project_columns(res.L_star, I_prime, complement=True), I_prime)
