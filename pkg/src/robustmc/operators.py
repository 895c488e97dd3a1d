"""Projections and proximal maps used by the solver and the theory toolkit."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .linalg import RANK_TOL, as_matrix, column_norms, svd, truncated_basis

# solver output is inexact, so "zero on the corrupted columns" gets a tolerance
RESTRICT_TOL = 1e-12
ORTHO_TOL = 1e-10


class ObservationMask:
    """A set of observed entries of a ``rows x cols`` matrix.

    Stored as a boolean array; :attr:`entries` lists the ``(i, j)`` pairs in
    lexicographic order, so two masks over the same set compare equal.
    """

    __slots__ = ("_bool",)

    def __init__(self, observed: np.ndarray):
        observed = np.asarray(observed, dtype=bool)
        if observed.ndim != 2:
            raise ValueError("mask must be 2-D")
        self._bool = observed.copy()
        self._bool.setflags(write=False)

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Iterable[tuple[int, int]]) -> "ObservationMask":
        arr = np.zeros((rows, cols), dtype=bool)
        idx = np.asarray(list(entries), dtype=np.int64).reshape(-1, 2)
        if idx.size:
            if idx.min() < 0 or np.any(idx[:, 0] >= rows) or np.any(idx[:, 1] >= cols):
                raise ValueError("mask entry out of range")
            flat = idx[:, 0] * cols + idx[:, 1]
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate mask entries")
            arr[idx[:, 0], idx[:, 1]] = True
        return cls(arr)

    @classmethod
    def full(cls, rows: int, cols: int) -> "ObservationMask":
        return cls(np.ones((rows, cols), dtype=bool))

    @classmethod
    def empty(cls, rows: int, cols: int) -> "ObservationMask":
        return cls(np.zeros((rows, cols), dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self._bool.shape

    @property
    def array(self) -> np.ndarray:
        """Read-only boolean view (True = observed)."""
        return self._bool

    @property
    def entries(self) -> np.ndarray:
        return np.argwhere(self._bool)

    def __len__(self) -> int:
        return int(np.count_nonzero(self._bool))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObservationMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._bool, other._bool))

    __hash__ = None

    def __repr__(self) -> str:
        return f"ObservationMask(shape={self.shape}, m={len(self)})"

    def complement(self) -> "ObservationMask":
        return ObservationMask(~self._bool)

    def union(self, other: "ObservationMask") -> "ObservationMask":
        return ObservationMask(self._bool | other._bool)

    def to_text(self) -> str:
        p, n = self.shape
        lines = [f"{p} {n} {len(self)}"] + [f"{i} {j}" for i, j in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ObservationMask":
        tokens = text.split()
        p, n, m = (int(t) for t in tokens[:3])
        vals = [int(t) for t in tokens[3:]]
        if len(vals) != 2 * m:
            raise ValueError(f"mask header says {m} entries, found {len(vals) // 2}")
        return cls.from_entries(p, n, zip(vals[0::2], vals[1::2]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "ObservationMask":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class ColumnSet:
    """Sorted set of column indices out of ``cols`` columns."""

    cols: int
    members: tuple[int, ...] = ()

    def __post_init__(self):
        members = tuple(sorted(int(j) for j in self.members))
        if len(set(members)) != len(members):
            raise ValueError("duplicate column indices")
        if members and (members[0] < 0 or members[-1] >= self.cols):
            raise ValueError(f"column index out of range [0, {self.cols})")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, j) -> bool:
        return j in self.members

    def indicator(self) -> np.ndarray:
        ind = np.zeros(self.cols, dtype=bool)
        ind[list(self.members)] = True
        return ind

    def complement(self) -> "ColumnSet":
        ind = self.indicator()
        return ColumnSet(self.cols, tuple(np.flatnonzero(~ind)))


@dataclass(frozen=True)
class TangentSpace:
    """Span of matrices sharing the column space ``U`` or the row space ``V``."""

    U: np.ndarray
    V: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        U = np.asarray(self.U, dtype=np.float64)
        V = np.asarray(self.V, dtype=np.float64)
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[1]:
            raise ValueError("U and V must be 2-D with the same number of columns")
        r = U.shape[1]
        if r > min(U.shape[0], V.shape[0]):
            raise ValueError("tangent rank exceeds matrix dimensions")
        if self.check:
            for name, B in (("U", U), ("V", V)):
                if np.max(np.abs(B.T @ B - np.eye(r)), initial=0.0) > ORTHO_TOL:
                    raise ValueError(f"{name} does not have orthonormal columns")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @classmethod
    def from_matrix(cls, L, tol: float = RANK_TOL) -> "TangentSpace":
        """Tangent space at ``L`` using its numerical-rank truncation."""
        U, V = truncated_basis(L, tol)
        return cls(U, V)

    @property
    def shape(self) -> tuple[int, int]:
        return self.U.shape[0], self.V.shape[0]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def project(self, A, complement: bool = False) -> np.ndarray:
        return project_tangent(A, self, complement)


def _check_shape(A: np.ndarray, shape: tuple[int, int]) -> None:
    if A.shape != tuple(shape):
        raise ValueError(f"dimension mismatch: matrix {A.shape} vs operator {tuple(shape)}")


def project_mask(A, omega: ObservationMask) -> np.ndarray:
    A = as_matrix(A)
    _check_shape(A, omega.shape)
    return np.where(omega.array, A, 0.0)


def project_columns(A, cols: ColumnSet, complement: bool = False) -> np.ndarray:
    A = as_matrix(A)
    if A.shape[1] != cols.cols:
        raise ValueError(f"dimension mismatch: {A.shape[1]} columns vs column set over {cols.cols}")
    keep = cols.indicator()
    if complement:
        keep = ~keep
    return A * keep[None, :]


def restrict(A, corrupted: ColumnSet, tol: float = RESTRICT_TOL) -> np.ndarray:
    """Drop the corrupted columns of a matrix that is zero on them."""
    A = as_matrix(A)
    if A.shape[1] != corrupted.cols:
        raise ValueError("dimension mismatch between matrix and column set")
    ind = corrupted.indicator()
    if ind.any() and np.max(np.abs(A[:, ind])) > tol:
        raise ValueError("restrict needs a matrix that vanishes on the corrupted columns")
    return A[:, ~ind].copy()


def embed(B, corrupted: ColumnSet, n: int) -> np.ndarray:
    """Inverse of :func:`restrict`: put zero columns back at the corrupted indices."""
    B = as_matrix(B)
    if corrupted.cols != n:
        raise ValueError("column set does not range over n columns")
    ind = corrupted.indicator()
    if B.shape[1] != n - len(corrupted):
        raise ValueError(f"expected {n - len(corrupted)} columns, got {B.shape[1]}")
    out = np.zeros((B.shape[0], n))
    out[:, ~ind] = B
    return out


def project_tangent(A, T: TangentSpace, complement: bool = False) -> np.ndarray:
    A = as_matrix(A)
    _check_shape(A, T.shape)
    U, V = T.U, T.V
    UtA = U.T @ A
    PU = U @ UtA
    if complement:
        R = A - PU
        return R - (R @ V) @ V.T
    return PU + (A @ V) @ V.T - U @ (UtA @ V) @ V.T


def shrink_singular(A, eps: float) -> np.ndarray:
    """Singular value soft-thresholding, the prox of ``eps * ||.||_*``."""
    if eps < 0:
        raise ValueError("threshold must be nonnegative")
    A = as_matrix(A)
    if eps == 0:
        return A.copy()
    f = svd(A)
    s = f.sigma - eps
    keep = s > 0
    if not keep.any():
        return np.zeros_like(A)
    return (f.U[:, keep] * s[keep]) @ f.V[:, keep].T


def shrink_columns(A, eps: float) -> np.ndarray:
    """Column-wise soft-thresholding, the prox of ``eps * ||.||_{1,2}``."""
    if eps < 0:
        raise ValueError("threshold must be nonnegative")
    A = as_matrix(A)
    norms = column_norms(A)
    scale = np.zeros_like(norms)
    big = norms > eps
    scale[big] = 1.0 - eps / norms[big]
    return A * scale[None, :]


def shrink_entries(A, eps: float) -> np.ndarray:
    """Entry-wise soft-thresholding, the prox of ``eps * ||.||_1``."""
    if eps < 0:
        raise ValueError("threshold must be nonnegative")
    A = as_matrix(A)
    return np.sign(A) * np.maximum(np.abs(A) - eps, 0.0)
