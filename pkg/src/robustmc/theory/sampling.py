"""Random-sampling operators on the clean-column tangent space.

Covers the sampling gap ``||(p n1 / m0) P_T P_Omega P_T - P_T||``, the golfing
recursion, and Monte-Carlo checks of the concentration bounds.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..linalg import make_rng, norm, orthonormal_columns
from ..operators import ObservationMask, TangentSpace, project_mask, project_tangent
from ..synth import sample_uniform_without_replacement
from .conditions import incoherence_mu

# dense tangent bases larger than this many doubles are refused
MAX_BASIS_ENTRIES = 50_000_000

LEMMAS = ("L3_invertible", "L5_inf", "L6_op_inf", "L7_inf2_order2", "L8_inf2_order1")


def tangent_basis(T: TangentSpace) -> np.ndarray:
    """Orthonormal basis of the tangent space, one column per basis matrix
    (flattened row-major), ``r * (p + n1 - r)`` columns in total."""
    p, n1 = T.shape
    r = T.rank
    d = r * (p + n1 - r)
    if p * n1 * d > MAX_BASIS_ENTRIES:
        raise ValueError(f"tangent space of dimension {d} is too large to materialize densely")
    if r == 0:
        return np.zeros((p * n1, 0))
    U, V = T.U, T.V
    Q, _ = np.linalg.qr(U, mode="complete")
    W = Q[:, r:]
    # u_k e_j^T for every k, j  and  w_l v_b^T for the complement of U
    part1 = np.einsum("ik,jl->ijkl", U, np.eye(n1)).reshape(p * n1, r * n1)
    part2 = np.einsum("il,jb->ijlb", W, V).reshape(p * n1, (p - r) * r)
    return np.hstack([part1, part2])


def tangent_sampling_gap(T: TangentSpace, omega0: ObservationMask, p: int, n1: int, m0: int) -> float:
    """Spectral norm of ``(p n1 / m0) P_T P_Omega0 P_T - P_T`` restricted to T."""
    if m0 <= 0:
        raise ValueError("m0 must be positive")
    if T.shape != (p, n1) or omega0.shape != (p, n1):
        raise ValueError("tangent space and mask must both be p x n1")
    B = tangent_basis(T)
    if B.shape[1] == 0:
        return 0.0
    Bo = B[omega0.array.ravel()]
    G = (p * n1 / m0) * (Bo.T @ Bo) - np.eye(B.shape[1])
    return float(np.max(np.abs(np.linalg.eigvalsh(G))))


def invertibility_bound(mu0: float, r: int, p: int, n1: int, m0: int, beta: float) -> float:
    return math.sqrt(16 * beta * mu0 * r * (n1 + p) * math.log(n1 + p) / (3 * m0))


def golfing_run(target, batches: list[ObservationMask], T: TangentSpace, p: int, n1: int, q: int,
                tol: float = 1e-8) -> tuple[np.ndarray, list[float]]:
    """Golfing recursion ``Y_i = Y_{i-1} + (p n1 / q) P_{Omega_i}(target - P_T Y_{i-1})``.

    Returns the final ``Y_s`` and ``||P_T(Y_i) - target||_F`` after every batch.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (p, n1):
        raise ValueError("target must be p x n1")
    off = norm(project_tangent(target, T, complement=True), "frobenius")
    if off > tol * max(1.0, norm(target, "frobenius")):
        raise ValueError("target is not in the tangent space")
    scale = p * n1 / q
    Y = np.zeros((p, n1))
    trace = []
    for batch in batches:
        if len(batch) != q:
            raise ValueError(f"every batch must hold exactly q={q} entries")
        Y = Y + scale * project_mask(target - project_tangent(Y, T), batch)
        trace.append(norm(project_tangent(Y, T) - target, "frobenius"))
    return Y, trace


@dataclass
class LemmaReport:
    which: str
    trials: int = 0
    lhs: list[float] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    applicable: list[bool] = field(default_factory=list)

    @property
    def violated(self) -> list[bool]:
        return [a > b for a, b in zip(self.lhs, self.rhs)]

    @property
    def violations(self) -> int:
        return sum(self.violated)

    @property
    def applicable_violations(self) -> int:
        """Violations among trials whose precondition held."""
        return sum(v and a for v, a in zip(self.violated, self.applicable))

    @property
    def bound_applicable(self) -> bool:
        return bool(self.applicable) and all(self.applicable)

    def merge(self, other: "LemmaReport") -> "LemmaReport":
        return LemmaReport(self.which, self.trials + other.trials, self.lhs + other.lhs,
                           self.rhs + other.rhs, self.applicable + other.applicable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "lhs", "rhs", "violated"])
        for i, (a, b, v) in enumerate(zip(self.lhs, self.rhs, self.violated)):
            w.writerow([i, repr(a), repr(b), int(v)])
        return buf.getvalue()


def random_tangent(p: int, n1: int, r: int, rng: np.random.Generator) -> TangentSpace:
    U = orthonormal_columns(rng.standard_normal((p, r)))
    V = orthonormal_columns(rng.standard_normal((n1, r)))
    return TangentSpace(U, V)


def _lemma_trial(which, p, n1, r, m0, beta, rng):
    T = random_tangent(p, n1, r, rng)
    mu0 = max(incoherence_mu(T.U, p, r), incoherence_mu(T.V, n1, r))
    omega = sample_uniform_without_replacement(p, n1, m0, rng)
    scale = p * n1 / m0
    logd = math.log(n1 + p)
    if which == "L3_invertible":
        lhs = tangent_sampling_gap(T, omega, p, n1, m0)
        rhs = invertibility_bound(mu0, r, p, n1, m0, beta)
        ok = beta > 1 and m0 > 16 / 3 * mu0 * r * (n1 + p) * beta * logd
    elif which == "L5_inf":
        Z = project_tangent(rng.standard_normal((p, n1)), T)
        # P_T(scale P_Omega Z - Z) equals scale P_T P_Omega Z - Z for Z in T
        lhs = norm(project_tangent(scale * project_mask(Z, omega) - Z, T), "entry_inf")
        rhs = math.sqrt(8 * beta * mu0 * r * (n1 + p) * logd / (3 * m0)) * norm(Z, "entry_inf")
        ok = beta > 2 and m0 > 8 / 3 * beta * mu0 * r * (n1 + p) * logd
    elif which == "L6_op_inf":
        Z = rng.standard_normal((p, n1))
        lhs = norm(scale * project_mask(Z, omega) - Z, "spectral")
        rhs = math.sqrt(8 * beta * p * n1 * max(p, n1) * logd / (3 * m0)) * norm(Z, "entry_inf")
        ok = beta > 1 and m0 > 6 * beta * min(n1, p) * logd
    elif which == "L7_inf2_order2":
        Z = project_tangent(rng.standard_normal((p, n1)), T)
        PZ = project_tangent(Z, T)
        lhs = norm(project_tangent(scale * project_mask(PZ, omega) - PZ, T), "inf_two")
        rhs = 16 / 3 * beta * math.sqrt(mu0 ** 2 * r ** 2 * p * n1 ** 2 / m0 ** 2 * math.log(2 * n1) ** 2) \
            * norm(Z, "inf_two")
        ok = beta > 1 and p <= n1
    elif which == "L8_inf2_order1":
        W = T.U @ rng.standard_normal((n1, r)).T
        lhs = norm(scale * project_mask(W, omega), "inf_two")
        rhs = (1 + math.sqrt(16 * beta * mu0 * r * (n1 + p) * p * logd / (3 * m0))) * norm(W, "inf_two")
        ok = beta > 1 and m0 >= 64 / 3 * beta * mu0 * r * (n1 + p) * logd
    else:
        raise ValueError(f"unknown lemma {which!r}; expected one of {LEMMAS}")
    return float(lhs), float(rhs), bool(ok)


def lemma_monte_carlo(which: str, p: int, n1: int, r: int, m0: int, beta: float, trials: int,
                      rng: np.random.Generator | int) -> LemmaReport:
    """Sample the displayed left- and right-hand sides of a concentration bound.

    Each trial draws a fresh random tangent space (Gaussian orthonormalized
    bases), a fresh fixed matrix ``Z`` of the required form, and an
    independent uniform mask of ``m0`` entries.  ``mu0`` is the incoherence
    of the drawn bases.  Trials outside the bound's precondition are still
    recorded but flagged as not applicable.
    """
    if which not in LEMMAS:
        raise ValueError(f"unknown lemma {which!r}; expected one of {LEMMAS}")
    if p < 1 or n1 < 1 or not 1 <= r <= min(p, n1):
        raise ValueError("invalid dimensions")
    if not 0 < m0 <= p * n1:
        raise ValueError("m0 must lie in (0, p * n1]")
    if isinstance(rng, (int, np.integer)):
        rng = make_rng(int(rng))
    report = LemmaReport(which)
    for _ in range(trials):
        lhs, rhs, ok = _lemma_trial(which, p, n1, r, m0, beta, rng)
        report.trials += 1
        report.lhs.append(lhs)
        report.rhs.append(rhs)
        report.applicable.append(ok)
    return report
