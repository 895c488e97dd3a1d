"""Checks on a supplied dual certificate and on feasible perturbations."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..linalg import column_norms, norm
from ..operators import (ColumnSet, ObservationMask, TangentSpace, embed, project_columns, project_mask,
                         project_tangent, restrict)
from .conditions import ConditionResult

MASK_TOL = 1e-10
DIRECTION_TOL = 1e-8
WITNESS_TOL = 1e-8


@dataclass(frozen=True)
class CertificateInput:
    Q_hat: np.ndarray
    T_hat: TangentSpace
    UV_t: np.ndarray
    C_hat: np.ndarray
    I0: ColumnSet
    Omega: ObservationMask
    lam: float
    m: int
    p: int
    n1: int

    def __post_init__(self):
        shape = np.shape(self.Q_hat)
        for name in ("UV_t", "C_hat"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must match Q_hat's shape {shape}")
        if self.T_hat.shape != shape or self.Omega.shape != shape or self.I0.cols != shape[1]:
            raise ValueError("tangent space, mask and column set must match Q_hat")
        if shape[1] - len(self.I0) != self.n1 or shape[0] != self.p:
            raise ValueError("p and n1 disagree with the matrix shape and I0")

    def scaled(self, c: float, scale_uv: bool = False) -> "CertificateInput":
        """Scale Q_hat, lambda and C_hat by ``c`` (and UV_t too if ``scale_uv``)."""
        uv = c * self.UV_t if scale_uv else self.UV_t
        return replace(self, Q_hat=c * self.Q_hat, lam=c * self.lam, C_hat=c * self.C_hat, UV_t=uv)


@dataclass(frozen=True)
class CertificateReport:
    a: ConditionResult
    b_prime: ConditionResult
    c_prime: ConditionResult
    d: ConditionResult
    e_prime: ConditionResult
    D: np.ndarray
    witness_consistent: bool

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.conditions().values())

    @property
    def strict(self) -> bool:
        """Both operator-norm inequalities, (c') and (e'), hold strictly."""
        return self.c_prime.slack > 0 and self.e_prime.slack > 0

    def conditions(self) -> dict[str, ConditionResult]:
        return {"a": self.a, "b_prime": self.b_prime, "c_prime": self.c_prime, "d": self.d, "e_prime": self.e_prime}


def dual_certificate_check(inp: CertificateInput) -> CertificateReport:
    """Evaluate conditions (a), (b'), (c'), (d), (e') for the given ``Q_hat``.

    For (b') the witness is ``D = R(P_{I0^c}(P_T(Q) - UV^T))``; when the
    residual lives on the clean columns this is the minimal-norm choice.  A
    pass is therefore conclusive, while a fail only says this canonical
    witness does not work.  Failed conditions are reported, never raised.
    """
    Q, T, lam = np.asarray(inp.Q_hat, dtype=np.float64), inp.T_hat, inp.lam
    n = Q.shape[1]

    off = float(np.max(np.abs(Q[~inp.Omega.array]), initial=0.0))
    a = ConditionResult(off <= MASK_TOL, off, 0.0, 0.0 - off)

    resid = project_tangent(Q, T) - inp.UV_t
    D = restrict(project_columns(resid, inp.I0, complement=True), inp.I0, tol=math.inf)
    back = project_tangent(embed(D, inp.I0, n), T)
    witness_consistent = norm(back - resid, "frobenius") <= WITNESS_TOL * max(1.0, norm(resid, "frobenius"))
    d_norm = norm(D, "frobenius")
    d_bound = 0.5 * math.sqrt(inp.m / (2 * inp.p * inp.n1)) * lam
    b_prime = ConditionResult(witness_consistent and d_norm <= d_bound, d_norm, d_bound, d_bound - d_norm)

    perp = norm(project_tangent(Q, T, complement=True), "spectral")
    c_prime = ConditionResult(perp <= 0.5, perp, 0.5, 0.5 - perp)

    d_cond = _subgradient_membership(project_columns(Q, inp.I0), inp.C_hat, inp.I0, lam)

    clean_norm = norm(project_columns(Q, inp.I0, complement=True), "inf_two")
    e_prime = ConditionResult(clean_norm <= lam / 2, clean_norm, lam / 2, lam / 2 - clean_norm)
    return CertificateReport(a, b_prime, c_prime, d_cond, e_prime, D, witness_consistent)


def _subgradient_membership(H, C_hat, I0: ColumnSet, lam: float) -> ConditionResult:
    """Is ``H`` in lam * G(C_hat)?  Columns on the support of C_hat must equal
    lam * C_i / ||C_i||; other corrupted columns need norm <= lam; the rest is zero.

    ``lhs`` is the largest norm among the free columns, ``slack`` its room
    below lam (infinite when there are none).
    """
    C_hat = np.asarray(C_hat, dtype=np.float64)
    cnorm = column_norms(C_hat)
    support = cnorm > 0
    in_I0 = I0.indicator()
    ok = not np.any(support & ~in_I0)
    ok &= not np.any(np.abs(H[:, ~in_I0]) > 0)
    hit = support & in_I0
    if hit.any():
        target = lam * C_hat[:, hit] / cnorm[hit]
        ok &= float(np.max(np.abs(H[:, hit] - target))) <= DIRECTION_TOL * max(lam, 1e-300)
    free = in_I0 & ~support
    hnorm = column_norms(H)
    worst = float(hnorm[free].max()) if free.any() else 0.0
    slack = lam - worst if free.any() else math.inf
    ok &= slack >= 0
    return ConditionResult(bool(ok), worst, lam, slack)


@dataclass(frozen=True)
class PerturbationReport:
    holds: bool
    lhs: float
    rhs: float


def perturbation_inequality_check(delta1, delta2, T_hat: TangentSpace, I0: ColumnSet, omega: ObservationMask,
                                  p: int, n1: int, m: int, tol: float = 1e-10) -> PerturbationReport:
    """Compare ``||P_{I0^c} P_T(D1)||_F`` with
    ``sqrt(2 p n1 / m) (||P_T^perp(D1)||_* + ||P_{I0^c}(D2)||_{1,2})``.

    The bound is a high-probability statement over the mask, so a violation
    is reported rather than raised.  The pair must be feasible.
    """
    d1 = np.asarray(delta1, dtype=np.float64)
    d2 = np.asarray(delta2, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(d1), initial=0.0)), float(np.max(np.abs(d2), initial=0.0)))
    if np.max(np.abs(project_mask(d1 + d2, omega)), initial=0.0) > tol * scale:
        raise ValueError("perturbations are not feasible: P_Omega(D1) + P_Omega(D2) != 0")
    if m <= 0:
        raise ValueError("m must be positive")
    lhs = norm(project_columns(project_tangent(d1, T_hat), I0, complement=True), "frobenius")
    rhs = math.sqrt(2 * p * n1 / m) * (
        norm(project_tangent(d1, T_hat, complement=True), "nuclear")
        + norm(project_columns(d2, I0, complement=True), "one_two")
    )
    return PerturbationReport(lhs <= rhs, lhs, rhs)


def orthogonal_corruption_example(lam: float = 0.4) -> CertificateInput:
    """A 4x4 instance with one corrupted column orthogonal to the column space.

    Clean block ``u v^T`` with ``u = (1,1,1,1)/2`` and ``v = (1,2,2)/3``,
    corrupted column 3 proportional to ``(1,-1,0,0)``, every entry
    observed, and ``Q = U V^T + lam * H`` with ``H`` the unit corrupted
    column.
    """
    u = np.full((4, 1), 0.5)
    v = np.array([[1.0], [2.0], [2.0], [0.0]]) / 3.0
    uv = u @ v.T
    C_hat = np.zeros((4, 4))
    C_hat[:, 3] = [1.0, -1.0, 0.0, 0.0]
    H = C_hat / np.linalg.norm(C_hat[:, 3])
    return CertificateInput(
        Q_hat=uv + lam * H, T_hat=TangentSpace(u, v), UV_t=uv, C_hat=C_hat,
        I0=ColumnSet(4, (3,)), Omega=ObservationMask.full(4, 4), lam=lam, m=12, p=4, n1=3,
    )
