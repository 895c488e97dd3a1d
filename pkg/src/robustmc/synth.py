"""Synthetic problem instances: low-rank truth, corrupted columns, sampled entries."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import format_matrix, make_rng, parse_matrix
from .operators import ColumnSet, ObservationMask

SCHEMES = ("none", "single_adversarial", "neutral_gaussian", "adversarial_copy")


@dataclass(frozen=True)
class CorruptionScheme:
    kind: str = "neutral_gaussian"
    magnitude: float = 10.0

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown corruption scheme {self.kind!r}; expected one of {SCHEMES}")
        if not np.isfinite(self.magnitude):
            raise ValueError("magnitude must be finite")


@dataclass
class ProblemInstance:
    p: int
    n: int
    n1: int
    r: int
    gamma: float
    rho: float
    L0: np.ndarray
    C0: np.ndarray
    I0: ColumnSet
    Omega: ObservationMask
    M_obs: np.ndarray
    seed: int
    scheme: CorruptionScheme = CorruptionScheme("none")

    @property
    def m(self) -> int:
        """Number of observed entries on the clean columns."""
        clean = ~self.I0.indicator()
        return int(np.count_nonzero(self.Omega.array[:, clean]))


def gen_low_rank(p: int, n1: int, r: int, rng: np.random.Generator) -> np.ndarray:
    """``A @ B.T`` with ``A`` (p x r) and ``B`` (n1 x r) standard Gaussian."""
    if not 0 <= r <= min(p, n1):
        raise ValueError(f"rank {r} out of range for a {p}x{n1} matrix")
    A = rng.standard_normal((p, r))
    B = rng.standard_normal((n1, r))
    return A @ B.T


def sample_uniform_without_replacement(p: int, n1: int, m: int, rng: np.random.Generator) -> ObservationMask:
    """A uniformly random size-``m`` subset of the ``p x n1`` grid."""
    total = p * n1
    if not 0 <= m <= total:
        raise ValueError(f"cannot draw {m} entries from a grid of {total}")
    flat = rng.permutation(total)[:m]
    observed = np.zeros(total, dtype=bool)
    observed[flat] = True
    return ObservationMask(observed.reshape(p, n1))


def sample_batch_replacement(p: int, n1: int, s: int, q: int, rng: np.random.Generator) -> list[ObservationMask]:
    """``s`` independent batches, each ``q`` distinct entries; batches may overlap."""
    if s < 1:
        raise ValueError("need at least one batch")
    if not 0 <= q <= p * n1:
        raise ValueError(f"batch size {q} out of range for a {p}x{n1} grid")
    return [sample_uniform_without_replacement(p, n1, q, rng) for _ in range(s)]


def n_corrupted(gamma: float, n: int) -> int:
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    return int(round(gamma * n))


def apply_corruption(L0_clean, scheme: CorruptionScheme, gamma: float, rho: float,
                     rng: np.random.Generator, clean_mask: ObservationMask | None = None):
    """Append corrupted columns to a clean ``p x n1`` matrix.

    Returns ``(L0, C0, I0, corrupted_obs)`` where ``L0`` and ``C0`` are
    ``p x n`` (corrupted columns trailing) and ``corrupted_obs`` is the
    observed set on the corrupted columns, as a ``p x n`` mask.  The
    adversarial-copy scheme needs ``clean_mask`` (the observed entries of
    the clean block) because it copies exactly those values.
    """
    L0_clean = np.asarray(L0_clean, dtype=np.float64)
    p, n1 = L0_clean.shape
    if scheme.kind == "single_adversarial":
        k = 1
    elif scheme.kind == "none":
        k = 0
    else:
        if not 0 < gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
        # n = n1 + k with k = round(gamma * n); solve for k given n1
        k = int(round(gamma * n1 / (1.0 - gamma)))
        if k < 1:
            raise ValueError(f"gamma={gamma} yields no corrupted columns")
    n = n1 + k
    block = np.zeros((p, k))
    obs = np.zeros((p, k), dtype=bool)
    if scheme.kind == "single_adversarial":
        if n1 < 1:
            raise ValueError("single_adversarial needs a clean column to imitate")
        block[:, 0] = L0_clean[:, 0]
        block[-1, 0] = scheme.magnitude
        obs[:] = True
    elif scheme.kind == "neutral_gaussian":
        block = rng.standard_normal((p, k))
        obs = rng.random((p, k)) < rho
    elif scheme.kind == "adversarial_copy":
        if clean_mask is None:
            raise ValueError("adversarial_copy needs the clean observation mask")
        if k > n1:
            raise ValueError("adversarial_copy needs at least as many clean columns as corrupted ones")
        block = rng.standard_normal((p, k))
        seen = clean_mask.array[:, :k]
        block[seen] = L0_clean[:, :k][seen]
        obs = rng.random((p, k)) < rho
    L0 = np.hstack([L0_clean, np.zeros((p, k))])
    C0 = np.hstack([np.zeros((p, n1)), block])
    I0 = ColumnSet(n, tuple(range(n1, n)))
    corrupted_obs = np.hstack([np.zeros((p, n1), dtype=bool), obs])
    return L0, C0, I0, ObservationMask(corrupted_obs)


def build_instance(p: int, n: int, r: int, gamma: float, rho: float,
                   scheme: CorruptionScheme | str = "neutral_gaussian", seed: int = 0,
                   permute: bool = False) -> ProblemInstance:
    """Assemble a full problem instance from a seed.

    ``round(gamma * n)`` columns are corrupted (exactly one for
    ``single_adversarial``), ``round(rho * p * n1)`` clean entries are
    observed uniformly at random, and corrupted columns sit at the trailing
    indices unless ``permute`` shuffles the columns.
    """
    if isinstance(scheme, str):
        scheme = CorruptionScheme(scheme)
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if scheme.kind == "single_adversarial":
        k = 1
    else:
        k = n_corrupted(gamma, n)
        if scheme.kind == "none" and k:
            raise ValueError("scheme 'none' requires gamma = 0")
        if gamma == 0:
            scheme = CorruptionScheme("none")
        elif k == 0:
            raise ValueError(f"gamma={gamma} gives no corrupted columns out of n={n}")
    n1 = n - k
    if n1 < 1 or not 0 <= r <= min(p, n1):
        raise ValueError(f"infeasible sizes p={p}, n={n}, n1={n1}, r={r}")
    gamma_eff = k / n
    rng = make_rng(seed)
    L_clean = gen_low_rank(p, n1, r, rng)
    m = int(round(rho * p * n1))
    clean_mask = sample_uniform_without_replacement(p, n1, m, rng)
    L0, C0, I0, corrupted_obs = apply_corruption(L_clean, scheme, gamma_eff, rho, rng, clean_mask)
    observed = corrupted_obs.array.copy()
    observed[:, :n1] = clean_mask.array
    if permute:
        perm = rng.permutation(n)
        L0, C0, observed = L0[:, perm], C0[:, perm], observed[:, perm]
        inv = np.argsort(perm)
        I0 = ColumnSet(n, tuple(int(inv[j]) for j in I0.members))
    omega = ObservationMask(observed)
    M_obs = np.where(observed, L0 + C0, 0.0)
    return ProblemInstance(p, n, n1, r, gamma_eff, rho, L0, C0, I0, omega, M_obs, seed, scheme)


# -- directory serialization -------------------------------------------------

def save_instance(inst: ProblemInstance, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "L0.txt").write_text(format_matrix(inst.L0))
    (d / "C0.txt").write_text(format_matrix(inst.C0))
    (d / "M_obs.txt").write_text(format_matrix(inst.M_obs))
    inst.Omega.save(d / "omega.txt")
    manifest = {
        "p": inst.p, "n": inst.n, "n1": inst.n1, "r": inst.r,
        "gamma": repr(inst.gamma), "rho": repr(inst.rho),
        "scheme": inst.scheme.kind, "magnitude": repr(inst.scheme.magnitude),
        "seed": inst.seed, "I0": ",".join(str(j) for j in inst.I0.members),
    }
    (d / "manifest.txt").write_text("".join(f"{k}={v}\n" for k, v in manifest.items()))


def load_instance(directory) -> ProblemInstance:
    d = Path(directory)
    kv = {}
    for line in (d / "manifest.txt").read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    n = int(kv["n"])
    members = tuple(int(j) for j in kv["I0"].split(",") if j)
    return ProblemInstance(
        p=int(kv["p"]), n=n, n1=int(kv["n1"]), r=int(kv["r"]),
        gamma=float(kv["gamma"]), rho=float(kv["rho"]),
        L0=parse_matrix((d / "L0.txt").read_text()),
        C0=parse_matrix((d / "C0.txt").read_text()),
        I0=ColumnSet(n, members),
        Omega=ObservationMask.load(d / "omega.txt"),
        M_obs=parse_matrix((d / "M_obs.txt").read_text()),
        seed=int(kv["seed"]),
        scheme=CorruptionScheme(kv["scheme"], float(kv["magnitude"])),
    )
