import math

import numpy as np
import pytest

from oracles import cvx_program, program_objective, subgradient_program
from robustmc.linalg import make_rng
from robustmc.operators import ColumnSet, ObservationMask
from robustmc.solver import (SolverConfig, SolverResult, default_support_threshold, extract_solution, objective,
                             solve)
from robustmc.synth import build_instance


def orthogonal_corruption_4x5(seed: int):
    """Rank-1 4x4 clean block and a fifth column orthogonal to its column space."""
    rng = make_rng(seed)
    a = rng.standard_normal(4)
    b = rng.standard_normal(4)
    c = rng.standard_normal(4)
    c -= (c @ a) / (a @ a) * a
    return np.column_stack([np.outer(a, b), 2.0 * c / np.linalg.norm(c)])


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mode="bogus")
    with pytest.raises(ValueError):
        SolverConfig(lam=0)
    with pytest.raises(ValueError):
        SolverConfig(alpha=1.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(u0=-1)


def test_rejects_data_outside_mask_and_shape_mismatch():
    omega = ObservationMask.from_entries(2, 2, [(0, 0)])
    with pytest.raises(ValueError):
        solve(np.ones((2, 2)), omega, SolverConfig())
    with pytest.raises(ValueError):
        solve(np.zeros((2, 3)), omega, SolverConfig())


def test_zero_input_short_circuits():
    res = solve(np.zeros((3, 4)), ObservationMask.full(3, 4), SolverConfig())
    assert res.iterations == 1 and res.converged
    assert not res.L_star.any() and not res.C_star.any()


def test_full_observation_large_lambda_returns_input():
    inst = build_instance(30, 30, 2, 0.0, 1.0, "none", seed=3)
    res = solve(inst.M_obs, inst.Omega, SolverConfig(lam=30.0))
    M = inst.M_obs
    assert res.converged
    assert np.linalg.norm(res.L_star - M) / np.linalg.norm(M) <= 1e-6
    assert np.linalg.norm(res.C_star) <= 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_orthogonal_corruption_matches_subgradient_oracle(seed):
    M = orthogonal_corruption_4x5(seed)
    lam = 0.6
    res = solve(M, ObservationMask.full(4, 5), SolverConfig(lam=lam))
    assert res.converged
    best = subgradient_program(M, lam)
    assert abs(res.objective(lam) - best) <= 1e-4 * best


@pytest.mark.parametrize("mode", ["column_sparse", "entry_sparse", "completion_only"])
def test_partial_observation_matches_interior_point(mode):
    inst = build_instance(6, 8, 1, 0.25, 0.8, "neutral_gaussian", seed=5)
    lam = 0.5
    res = solve(inst.M_obs, inst.Omega, SolverConfig(lam=lam, mode=mode))
    assert res.converged
    value, _, _ = cvx_program(inst.M_obs, inst.Omega.array, lam, mode)
    assert res.objective(lam, mode) == pytest.approx(value, rel=1e-4)


def test_convergence_contract_and_e_support():
    inst = build_instance(40, 40, 2, 0.1, 0.6, "neutral_gaussian", seed=1)
    res = solve(inst.M_obs, inst.Omega, SolverConfig(lam=0.5))
    assert res.converged
    M = inst.M_obs
    resid = np.linalg.norm(M - res.E - res.L_star - res.C_star) / np.linalg.norm(M)
    assert resid <= 1e-6
    assert resid == pytest.approx(res.residual_trace[-1], rel=1e-9)
    assert not res.E[inst.Omega.array].any()
    assert len(res.residual_trace) == res.iterations


@pytest.mark.parametrize("seed", range(5))
def test_residual_minimum_in_final_tenth(seed):
    inst = build_instance(30, 30, 2, 0.1, 0.7, "neutral_gaussian", seed=seed)
    res = solve(inst.M_obs, inst.Omega, SolverConfig(lam=0.6))
    assert res.converged
    k = len(res.residual_trace)
    assert int(np.argmin(res.residual_trace)) >= k - max(1, math.ceil(0.1 * k))


def test_nonconvergence_is_reported_not_raised():
    inst = build_instance(20, 20, 2, 0.1, 0.7, "neutral_gaussian", seed=0)
    res = solve(inst.M_obs, inst.Omega, SolverConfig(lam=0.5, max_iter=3))
    assert not res.converged and res.iterations == 3


def test_completion_only_recovers_clean_low_rank():
    inst = build_instance(40, 40, 2, 0.0, 0.6, "none", seed=2)
    res = solve(inst.M_obs, inst.Omega, SolverConfig(mode="completion_only"))
    assert not res.C_star.any()
    assert np.linalg.norm(res.L_star - inst.L0) / np.linalg.norm(inst.L0) <= 1e-4


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_positive_scaling_equivariance(c):
    inst = build_instance(25, 25, 2, 0.1, 0.7, "neutral_gaussian", seed=4)
    cfg = SolverConfig(lam=0.6)
    base = solve(inst.M_obs, inst.Omega, cfg)
    scaled = solve(c * inst.M_obs, inst.Omega, cfg)
    assert scaled.iterations == base.iterations
    np.testing.assert_allclose(scaled.L_star, c * base.L_star, atol=1e-8 * c * np.abs(base.L_star).max())
    np.testing.assert_allclose(scaled.C_star, c * base.C_star, atol=1e-8 * c * np.abs(base.L_star).max())


def _result_with(C):
    z = np.zeros_like(C)
    L = np.arange(C.size, dtype=float).reshape(C.shape)
    return SolverResult(L, C, z, z, 1, [0.0], True, default_support_threshold(L))


def test_extract_solution_examples():
    C = np.zeros((3, 4))
    sol = extract_solution(_result_with(C))
    assert sol.I_prime == ColumnSet(4) and np.array_equal(sol.L_prime, _result_with(C).L_star)

    C[:, 2] = [1.0, 2.0, 2.0]
    sol = extract_solution(_result_with(C), threshold=1e-6)
    assert sol.I_prime.members == (2,)
    assert not sol.L_prime[:, 2].any()
    assert extract_solution(_result_with(C), threshold=math.inf).I_prime.members == ()


def test_objective_by_mode():
    L = np.diag([2.0, 1.0])
    C = np.array([[3.0, 0.0], [4.0, -1.0]])
    assert objective(L, C, 0.5) == pytest.approx(3 + 0.5 * 6)
    assert objective(L, C, 0.5, "entry_sparse") == pytest.approx(3 + 0.5 * 8)
    assert objective(L, C, 0.5) == pytest.approx(program_objective(L, C, 0.5))
