"""Dense matrix primitives: thin SVD, the matrix norms, seeded RNG, text I/O.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in C order
(row index varies slower).  Nothing here mutates its inputs.
"""

from __future__ import annotations

from pathlib import Path
from typing import NamedTuple

import numpy as np

NORM_KINDS = ("nuclear", "spectral", "entry_inf", "one_two", "inf_two", "frobenius")

# relative cut-off below which a singular value counts as zero
RANK_TOL = 1e-9


class SvdError(RuntimeError):
    """Raised when LAPACK fails to converge on an SVD."""


class SvdFactors(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T

    def rank(self, tol: float = RANK_TOL) -> int:
        return numerical_rank(self.sigma, tol)


def as_matrix(A) -> np.ndarray:
    """Validate and coerce ``A`` to a finite 2-D float64 array."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def svd(A) -> SvdFactors:
    """Thin SVD with ``k = min(rows, cols)`` factors.

    Uses LAPACK's divide-and-conquer driver and falls back to the QR-iteration
    driver (``gesvd``) when the former does not converge.  If both fail an
    :class:`SvdError` is raised; a result is never silently garbage.
    """
    A = as_matrix(A)
    p, n = A.shape
    if p == 0 or n == 0:
        k = min(p, n)
        return SvdFactors(np.zeros((p, k)), np.zeros(k), np.zeros((n, k)))
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            import scipy.linalg

            U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SvdError(f"SVD did not converge on a {p}x{n} matrix") from exc
    return SvdFactors(U, s, Vt.T)


def numerical_rank(sigma, tol: float = RANK_TOL) -> int:
    sigma = np.asarray(sigma)
    if sigma.size == 0 or sigma[0] <= 0:
        return 0
    return int(np.count_nonzero(sigma > tol * sigma[0]))


def truncated_basis(A, tol: float = RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal column/row space bases of ``A`` at its numerical rank."""
    f = svd(A)
    r = f.rank(tol)
    return f.U[:, :r], f.V[:, :r]


def norm(A, kind: str) -> float:
    """One of the six matrix norms.

    ``one_two`` is the sum of column l2 norms and ``inf_two`` the largest
    column l2 norm; ``entry_inf`` is the largest absolute entry.
    """
    A = as_matrix(A)
    if kind == "frobenius":
        return float(np.sqrt(np.sum(A * A)))
    if kind == "entry_inf":
        return float(np.max(np.abs(A))) if A.size else 0.0
    if kind in ("one_two", "inf_two"):
        if A.size == 0:
            return 0.0
        cols = np.sqrt(np.sum(A * A, axis=0))
        return float(cols.sum() if kind == "one_two" else cols.max())
    if kind in ("nuclear", "spectral"):
        s = svd(A).sigma
        if s.size == 0:
            return 0.0
        return float(s.sum() if kind == "nuclear" else s[0])
    raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def inner(A, B) -> float:
    """Trace inner product <A, B>."""
    return float(np.sum(np.asarray(A) * np.asarray(B)))


def column_norms(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    return np.sqrt(np.sum(A * A, axis=0))


def orthonormal_columns(A) -> np.ndarray:
    """Orthonormal basis for the column space of a full-column-rank ``A``."""
    Q, _ = np.linalg.qr(as_matrix(A))
    return Q


# -- random numbers ---------------------------------------------------------

def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; same seed gives the same stream on any platform."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def child_seed(seed: int, task: int) -> int:
    """Seed for parallel task ``task`` derived from a parent seed."""
    return (int(seed) ^ int(task)) & 0xFFFFFFFFFFFFFFFF


# -- text serialization -----------------------------------------------------

def format_matrix(A) -> str:
    A = as_matrix(A)
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in A]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("matrix text is missing its 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    values = tokens[2:]
    if len(values) != rows * cols:
        raise ValueError(f"expected {rows * cols} values, found {len(values)}")
    return as_matrix(np.array([float(v) for v in values]).reshape(rows, cols))


def save_matrix(path, A) -> None:
    Path(path).write_text(format_matrix(A))


def load_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())
