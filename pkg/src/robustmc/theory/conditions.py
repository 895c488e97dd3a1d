"""Incoherence, closed-form lambda selectors, and theorem side-condition checks.

All logarithms are natural.  The absolute constants ``eta1..eta3`` are never
given numerically, so they are inputs (default 1.0) and every check reports
its slack for calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RULES = ("theorem1", "corollary1", "corollary2", "corollary3", "theorem2")


def incoherence_mu(basis, dim: int, r: int, tol: float = 1e-10) -> float:
    """Smallest ``mu0`` with ``max_i ||basis^T e_i||^2 <= mu0 * r / dim``."""
    B = np.asarray(basis, dtype=np.float64)
    if B.ndim != 2 or B.shape != (dim, r):
        raise ValueError(f"basis must be {dim}x{r}, got {B.shape}")
    if r < 1:
        raise ValueError("incoherence needs r >= 1")
    if np.max(np.abs(B.T @ B - np.eye(r))) > tol:
        raise ValueError("basis columns are not orthonormal")
    return float(dim / r * np.max(np.sum(B * B, axis=1)))


@dataclass(frozen=True)
class TheoremParams:
    p: int
    n: int
    n1: int
    r_bar: float = 1.0
    gamma_bar: float = 0.0
    rho_lower: float = 1.0
    mu0: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0
    eta3: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho_lower <= 1:
            raise ValueError("rho_lower must lie in (0, 1]")
        if not 0 <= self.gamma_bar < 1:
            raise ValueError("gamma_bar must lie in [0, 1)")


@dataclass(frozen=True)
class ConditionResult:
    holds: bool
    lhs: float
    rhs: float
    slack: float


def _positive(params: TheoremParams, *names: str) -> None:
    for name in names:
        if not getattr(params, name) > 0:
            raise ValueError(f"{name} must be positive for this rule")


def lambda_select(rule: str, params: TheoremParams) -> float:
    """Closed-form lambda prescribed by one of the recovery results."""
    P = params
    if rule == "theorem1":
        _positive(P, "gamma_bar", "r_bar", "mu0", "n", "n1")
        return math.sqrt(P.rho_lower / (P.gamma_bar * P.r_bar * P.mu0 * P.n * math.log(4 * P.n1) ** 2)) / 48
    if rule == "corollary1":
        _positive(P, "p", "n")
        return math.sqrt(P.p ** 0.25 / P.n)
    if rule == "corollary2":
        _positive(P, "mu0", "r_bar", "n", "n1")
        return P.mu0 * P.r_bar * math.log(4 * P.n1) ** 2 / math.sqrt(P.n)
    if rule == "corollary3":
        if P.gamma_bar != 0:
            raise ValueError("corollary3 applies only to gamma_bar = 0")
        _positive(P, "n")
        return float(P.n)
    if rule == "theorem2":
        _positive(P, "gamma_bar", "n")
        return 1.0 / (4 * math.sqrt(P.gamma_bar * P.n))
    raise ValueError(f"unknown lambda rule {rule!r}; expected one of {RULES}")


def _ge(lhs: float, rhs: float) -> ConditionResult:
    return ConditionResult(lhs >= rhs, lhs, rhs, lhs - rhs)


def _le(lhs: float, rhs: float) -> ConditionResult:
    return ConditionResult(lhs <= rhs, lhs, rhs, rhs - lhs)


def _dims(P: TheoremParams) -> ConditionResult:
    # n1 >= p >= 32 as a single chained check; slack is the tighter link
    slack = min(P.n1 - P.p, P.p - 32)
    return ConditionResult(slack >= 0, float(P.n1), 32.0, float(slack))


def check_theorem_conditions(rule: str, params: TheoremParams) -> dict[str, ConditionResult]:
    """Evaluate each displayed hypothesis of ``rule`` literally.

    Slack is positive when the inequality holds with room to spare.
    """
    P = params
    mu, r, rho, g = P.mu0, P.r_bar, P.rho_lower, P.gamma_bar
    L4 = math.log(4 * P.n1) if P.n1 > 0 else float("nan")
    gamma_ratio = g / (1 - g)
    if rule == "theorem1":
        rho_rhs = P.eta1 * mu ** 2 * r ** 2 * L4 ** 3 / P.p
        gamma_rhs = P.eta2 * rho ** 2 / ((1 + mu * r / (rho * math.sqrt(P.p))) ** 2 * mu ** 3 * r ** 3 * L4 ** 6)
        return {"dims": _dims(P), "rho": _ge(rho, rho_rhs), "gamma": _le(gamma_ratio, gamma_rhs)}
    if rule == "theorem2":
        logp = math.log(P.p)
        rho_rhs = P.eta1 * mu ** 2 * r ** 2 * L4 ** 2 / (math.sqrt(P.p) * logp)
        gamma_rhs = P.eta2 * rho ** 2 / (mu ** 2 * r ** 2 * L4 ** 2 / logp ** 2)
        return {"dims": _dims(P), "rho": _ge(rho, rho_rhs), "gamma": _le(gamma_ratio, gamma_rhs)}
    if rule == "corollary1":
        return {
            "rank": _le(r, P.eta1 / mu),
            "rho": _ge(rho, P.eta2 * L4 / P.p ** 0.25),
            "gamma": _le(g, P.eta3 / math.sqrt(P.p)),
        }
    if rule == "corollary2":
        return {
            "rho": _ge(rho, 0.1),
            "rank": _le(r, P.eta1 * math.sqrt(P.p) / (mu * L4 ** 1.5)),
            "gamma": _le(g, P.eta2 / (mu ** 3 * r ** 3 * L4 ** 6)),
        }
    if rule == "corollary3":
        m = rho * P.p * P.n1
        return {
            "gamma": ConditionResult(g == 0, g, 0.0, -g),
            "m": _ge(m, P.eta1 * mu ** 2 * r ** 2 * P.n * math.log(4 * P.n) ** 2),
        }
    raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
