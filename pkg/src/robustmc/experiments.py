"""Recovery trials, phase-diagram grids, and their CSV / PGM renderings."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .linalg import SvdError, norm, truncated_basis
from .operators import project_columns
from .solver import MODES, SolverConfig, extract_solution, solve
from .synth import SCHEMES, CorruptionScheme, ProblemInstance, build_instance
from .theory.conditions import RULES, TheoremParams, incoherence_mu, lambda_select

DEFAULT_SUCCESS_TOL = 1e-3
AXES = ("rho", "r", "gamma", "p", "n", "magnitude")
INTEGER_AXES = ("r", "p", "n")
THREADS_ENV = "ROBUSTMC_THREADS"


@dataclass(frozen=True)
class RecoveryReport:
    clean_rel_error: float
    support_exact: bool
    colspace_ok: bool
    success: bool
    iterations: int
    wall_time: float
    converged: bool = False
    final_residual: float = math.inf
    reason: str = ""


def run_trial(inst: ProblemInstance, cfg: SolverConfig, success_tol: float = DEFAULT_SUCCESS_TOL) -> RecoveryReport:
    """Solve one instance and score it against the ground truth.

    Success needs the clean columns of ``L'`` within ``success_tol`` relative
    error of ``L0``, the exact corrupted set, and ``L'`` inside the column
    space of ``L0`` (same relative tolerance).  Numerical failures inside
    the solver come back as a failed report tagged ``solver_error``.
    """
    if inst.M_obs.shape != (inst.p, inst.n) or inst.L0.shape != inst.M_obs.shape:
        raise ValueError("instance matrices disagree with its declared dimensions")
    start = time.perf_counter()
    try:
        res = solve(inst.M_obs, inst.Omega, cfg)
        sol = extract_solution(res)
    except (SvdError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return RecoveryReport(math.inf, False, False, False, 0, time.perf_counter() - start,
                              reason=f"solver_error: {exc}")
    elapsed = time.perf_counter() - start

    L_prime = sol.L_prime
    clean_part = project_columns(L_prime, inst.I0, complement=True)
    truth_norm = norm(inst.L0, "frobenius")
    gap = norm(clean_part - inst.L0, "frobenius")
    rel_err = gap / truth_norm if truth_norm > 0 else gap

    support_exact = sol.I_prime.members == inst.I0.members

    U0, _ = truncated_basis(inst.L0)
    off_space = L_prime - U0 @ (U0.T @ L_prime)
    colspace_ok = norm(off_space, "frobenius") <= success_tol * norm(L_prime, "frobenius")

    success = rel_err <= success_tol and support_exact and colspace_ok
    reason = "" if res.converged else "not_converged"
    final = res.residual_trace[-1] if res.residual_trace else math.inf
    return RecoveryReport(float(rel_err), bool(support_exact), bool(colspace_ok), bool(success),
                          res.iterations, elapsed, res.converged, float(final), reason)


# -- grids ------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """A two-axis sweep.  Rows follow ``axis1``, columns follow ``axis2``.

    ``fixed`` supplies every instance parameter not swept (``p``, ``n``,
    ``r``, ``rho``, ``gamma``, ``magnitude``).  Column-sparse runs use
    ``lam`` when given, otherwise ``lambda_rule`` evaluated per instance;
    entry-sparse runs use ``entry_lam`` or ``1/sqrt(max(p, n))``.
    """

    axis1: tuple[str, tuple[float, ...]]
    axis2: tuple[str, tuple[float, ...]]
    fixed: dict = field(default_factory=dict)
    trials: int = 5
    base_seed: int = 0
    modes: tuple[str, ...] = ("column_sparse",)
    scheme: str = "single_adversarial"
    lam: float | None = None
    lambda_rule: str = "corollary1"
    entry_lam: float | None = None
    success_tol: float = DEFAULT_SUCCESS_TOL
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        object.__setattr__(self, "axis1", (self.axis1[0], tuple(self.axis1[1])))
        object.__setattr__(self, "axis2", (self.axis2[0], tuple(self.axis2[1])))
        object.__setattr__(self, "modes", tuple(self.modes))
        for name, values in (self.axis1, self.axis2):
            if name not in AXES:
                raise ValueError(f"unknown grid axis {name!r}; expected one of {AXES}")
            if not values:
                raise ValueError(f"axis {name!r} has no values")
        if self.axis1[0] == self.axis2[0]:
            raise ValueError("the two grid axes must differ")
        unknown = set(self.fixed) - set(AXES)
        if unknown:
            raise ValueError(f"unknown fixed parameters {sorted(unknown)}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise ValueError(f"modes must be a nonempty subset of {MODES}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.lam is None and self.lambda_rule not in RULES:
            raise ValueError(f"unknown lambda rule {self.lambda_rule!r}; expected one of {RULES}")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.axis1[1]), len(self.axis2[1])

    def cell_params(self, i: int, j: int) -> dict:
        params = {"p": 80, "n": 80, "r": 2, "rho": 0.7, "gamma": 0.0, "magnitude": 10.0}
        params.update(self.fixed)
        params[self.axis1[0]] = self.axis1[1][i]
        params[self.axis2[0]] = self.axis2[1][j]
        for key in INTEGER_AXES:
            params[key] = int(round(params[key]))
        return params


@dataclass
class GridResult:
    spec: GridSpec
    frequencies: dict[str, np.ndarray]
    reports: dict[str, list] = field(default_factory=dict)


def trial_seed(base_seed: int, i: int, j: int, trial: int) -> int:
    """``base_seed`` plus a stable hash of the cell and trial index."""
    digest = hashlib.blake2b(f"{i},{j},{trial}".encode(), digest_size=8).digest()
    return (int(base_seed) + int.from_bytes(digest, "little")) % (1 << 63)


def grid_instance(spec: GridSpec, i: int, j: int, trial: int) -> ProblemInstance:
    c = spec.cell_params(i, j)
    scheme = CorruptionScheme(spec.scheme, float(c["magnitude"]))
    return build_instance(c["p"], c["n"], c["r"], float(c["gamma"]), float(c["rho"]), scheme,
                          trial_seed(spec.base_seed, i, j, trial))


def resolve_lambda(mode: str, inst: ProblemInstance, lam: float | None = None, rule: str = "corollary1",
                   entry_lam: float | None = None) -> float:
    """Penalty weight for ``mode`` on ``inst``.

    Column-sparse uses ``lam`` or else ``rule`` evaluated on the instance;
    entry-sparse uses ``entry_lam`` or else ``1/sqrt(max(p, n))``.
    """
    if mode == "entry_sparse":
        return entry_lam if entry_lam is not None else 1.0 / math.sqrt(max(inst.p, inst.n))
    if mode == "completion_only":
        # ignored by the solver, but SolverConfig insists on a positive value
        return 1.0
    if lam is not None:
        return lam
    return lambda_select(rule, instance_params(inst))


def lambda_for(spec: GridSpec, inst: ProblemInstance, mode: str) -> float:
    return resolve_lambda(mode, inst, spec.lam, spec.lambda_rule, spec.entry_lam)


def instance_params(inst: ProblemInstance) -> TheoremParams:
    """Theorem parameters read off a ground-truth instance."""
    L_clean = project_columns(inst.L0, inst.I0, complement=True)
    U, V = truncated_basis(L_clean)
    r = U.shape[1]
    mu0 = 1.0
    if r:
        keep = ~inst.I0.indicator()
        V_clean = V[keep]
        mu0 = max(incoherence_mu(U, inst.p, r), incoherence_mu(V_clean, inst.n1, r))
    return TheoremParams(p=inst.p, n=inst.n, n1=inst.n1, r_bar=max(r, 1), gamma_bar=inst.gamma,
                         rho_lower=inst.rho, mu0=mu0)


def _run_task(args) -> tuple[int, int, int, list[RecoveryReport]]:
    spec, i, j, trial = args
    with threadpool_limits(1):
        inst = grid_instance(spec, i, j, trial)
        out = []
        for mode in spec.modes:
            cfg = replace(spec.solver, mode=mode, lam=lambda_for(spec, inst, mode))
            out.append(run_trial(inst, cfg, spec.success_tol))
    return i, j, trial, out


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{THREADS_ENV} must be at least 1")
    return min(value, os.cpu_count() or 1)


def run_grid(spec: GridSpec, workers: int | None = None) -> GridResult:
    """Success frequency per cell and mode.

    Every task owns its seed and runs with single-threaded BLAS, so the
    result does not depend on ``workers`` (default: ``ROBUSTMC_THREADS``,
    else serial).  All modes in one trial see the same instance.
    """
    if workers is None:
        workers = default_workers()
    rows, cols = spec.shape
    tasks = [(spec, i, j, t) for i in range(rows) for j in range(cols) for t in range(spec.trials)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_run_task(t) for t in tasks]

    counts = {m: np.zeros((rows, cols), dtype=np.int64) for m in spec.modes}
    reports = {m: [] for m in spec.modes}
    for i, j, t, per_mode in sorted(results, key=lambda x: x[:3]):
        for mode, rep in zip(spec.modes, per_mode):
            counts[mode][i, j] += rep.success
            reports[mode].append(((i, j, t), rep))
    freqs = {m: counts[m] / spec.trials for m in spec.modes}
    return GridResult(spec, freqs, reports)


# -- output formats ---------------------------------------------------------

def _label(value) -> str:
    return repr(int(value)) if float(value).is_integer() else repr(float(value))


def grid_to_csv(freq, axis1, axis2) -> str:
    """Header ``axis1\\axis2`` then the axis-2 values; one row per axis-1 value."""
    freq = np.asarray(freq, dtype=np.float64)
    name1, vals1 = axis1
    name2, vals2 = axis2
    if freq.shape != (len(vals1), len(vals2)):
        raise ValueError("frequency grid does not match the axes")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{name1}\\{name2}"] + [_label(v) for v in vals2])
    for v, row in zip(vals1, freq):
        w.writerow([_label(v)] + [repr(float(x)) for x in row])
    return buf.getvalue()


def read_grid_csv(text: str):
    """Inverse of :func:`grid_to_csv`; returns ``(freq, axis1, axis2)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or "\\" not in rows[0][0]:
        raise ValueError("missing 'axis1\\axis2' header cell")
    name1, name2 = rows[0][0].split("\\", 1)
    vals2 = tuple(float(x) for x in rows[0][1:])
    vals1 = tuple(float(r[0]) for r in rows[1:])
    freq = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64).reshape(len(vals1), len(vals2))
    return freq, (name1, vals1), (name2, vals2)


def grid_to_pgm(freq) -> str:
    """Plain PGM (P2), maxval 255, white meaning every trial succeeded."""
    freq = np.asarray(freq, dtype=np.float64)
    if freq.ndim != 2 or np.any((freq < 0) | (freq > 1)):
        raise ValueError("frequencies must be a 2-D array in [0, 1]")
    pixels = np.rint(255 * freq).astype(int)
    lines = ["P2", f"{freq.shape[1]} {freq.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pixels]
    return "\n".join(lines) + "\n"


def emit(result: GridResult, mode: str, fmt: str, path=None) -> str:
    """Render one mode's grid; write it to ``path`` when given."""
    if fmt == "csv":
        text = grid_to_csv(result.frequencies[mode], result.spec.axis1, result.spec.axis2)
    elif fmt == "pgm":
        text = grid_to_pgm(result.frequencies[mode])
    else:
        raise ValueError(f"unknown output format {fmt!r}; expected csv or pgm")
    if path is not None:
        Path(path).write_text(text)
    return text
