import numpy as np
import pytest

from conftest import random_context, unit_context
from memcalib import (
    FunctionalSample,
    GaussianSystem,
    Kernel,
    MeanTarget,
    MemContext,
    assemble_system,
    constraint_residual,
    coupling_field,
    gaussian_adjustment,
    h_objective_gaussian,
    kernel_matrix,
    make_grids,
    mem_gaussian_weights,
    solve_lambda,
    srswor_design,
)
from memcalib.mem_gaussian import h_gradient_gaussian


def test_unit_system_and_solution():
    ctx = unit_context()
    system = assemble_system(ctx)
    assert system.M.tolist() == [[4.0]] and system.r.tolist() == [2.0]
    sol = solve_lambda(system)
    assert sol.lam_star.tolist() == [[0.5]] and sol.ls_residual_norm == 0.0
    varpi = gaussian_adjustment(sol, ctx.xbar, ctx.km, ctx.grids)
    assert varpi.tolist() == [1.0]
    w = ctx.weights_for(varpi, "g")
    assert w.w.tolist() == [[3.0]]
    assert constraint_residual(w, ctx.sample, ctx.target).tolist() == [[0.0]]


def test_assembled_matrix_symmetric_psd_low_rank():
    for seed in range(5):
        ctx = random_context(np.random.default_rng(seed), J=6, L=5, q=2)
        M = assemble_system(ctx).M
        assert np.max(np.abs(M - M.T)) <= 1e-12
        assert np.linalg.eigvalsh(M).min() >= -1e-10
        s = np.linalg.svd(M, compute_uv=False)
        assert np.sum(s > 1e-10 * s[0]) <= ctx.grids.J


def test_assembly_matches_blockwise_definition():
    ctx = random_context(np.random.default_rng(9), J=4, L=3, q=2)
    K, xb, J, L = ctx.km, ctx.xbar, ctx.grids.J, ctx.grids.L
    M = np.zeros((L * 2, L * 2))
    for l in range(L):
        for m in range(L):
            M[2 * l:2 * l + 2, 2 * m:2 * m + 2] = (K[:, l] @ K[:, m]) * np.outer(xb[l], xb[m]) / (J * L)
    np.testing.assert_allclose(assemble_system(ctx).M, M, rtol=1e-13)


def test_solve_small_cases():
    zero = solve_lambda(GaussianSystem(np.array([[4.0]]), np.array([0.0]), (1, 1)))
    assert zero.lam_star.tolist() == [[0.0]]
    sing = solve_lambda(GaussianSystem(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([3.0, 0.0]), (2, 1)))
    np.testing.assert_allclose(sing.lam_star.ravel(), [3.0, 0.0], atol=1e-15)
    assert sing.ls_residual_norm == 0.0 and sing.effective_rank == 1


def test_solve_all_zero_matrix_is_flagged():
    sol = solve_lambda(GaussianSystem(np.zeros((2, 2)), np.array([3.0, 4.0]), (2, 1)))
    assert sol.degenerate and sol.lam_star.tolist() == [[0.0], [0.0]]
    assert sol.ls_residual_norm == pytest.approx(5.0)


@pytest.mark.parametrize("rcond", [0.0, 1.0, -1e-3])
def test_solve_rejects_bad_rcond(rcond):
    with pytest.raises(ValueError):
        solve_lambda(GaussianSystem(np.eye(1), np.ones(1), (1, 1)), rcond)


def test_adjustment_equals_coupling_field():
    ctx = random_context(np.random.default_rng(1))
    sol = solve_lambda(assemble_system(ctx))
    np.testing.assert_array_equal(gaussian_adjustment(sol, ctx.xbar, ctx.km, ctx.grids),
                                  coupling_field(sol.lam_star, ctx.xbar, ctx.km, ctx.grids))
    zero = sol.__class__(np.zeros(ctx.shape), 0.0, 0, 0.0)
    assert not gaussian_adjustment(zero, ctx.xbar, ctx.km, ctx.grids).any()


def test_objective_values_and_gradient():
    system = assemble_system(unit_context())
    assert h_objective_gaussian([[0.0]], system) == 0.0
    assert h_objective_gaussian([[0.5]], system) == -0.5
    rng = np.random.default_rng(2)
    ctx = random_context(rng)
    system = assemble_system(ctx)
    for _ in range(5):
        lam = rng.normal(size=ctx.shape)
        g = h_gradient_gaussian(lam, system).ravel()
        fd = np.empty_like(g)
        h = 1e-5
        for k in range(g.size):
            e = np.zeros(g.size)
            e[k] = h
            fd[k] = (h_objective_gaussian(lam.ravel() + e, system)
                     - h_objective_gaussian(lam.ravel() - e, system)) / (2 * h)
        assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_constraint_residual_equals_system_residual():
    for seed in range(4):
        ctx = random_context(np.random.default_rng(seed), J=6, L=5, q=2)
        system = assemble_system(ctx)
        w, sol = mem_gaussian_weights(ctx)
        resid = (system.M @ sol.lam_star.ravel() - system.r).reshape(ctx.shape)
        np.testing.assert_allclose(constraint_residual(w, ctx.sample, ctx.target), resid, rtol=0, atol=1e-9)
        assert sol.constraint_max_abs == pytest.approx(np.abs(resid).max(), abs=1e-12)
        assert h_objective_gaussian(sol.lam_star, system) <= 0.0


def test_constraint_identity_at_small_rcond_up_to_roundoff():
    # with a tiny cutoff the multiplier is large, so allow eps * |M| |lam|
    for seed in range(4):
        ctx = random_context(np.random.default_rng(seed), J=6, L=5, q=2)
        system = assemble_system(ctx)
        w, sol = mem_gaussian_weights(ctx, 1e-10)
        resid = (system.M @ sol.lam_star.ravel() - system.r).reshape(ctx.shape)
        bound = 64 * np.finfo(float).eps * np.abs(system.M).max() * np.abs(sol.lam_star).sum()
        np.testing.assert_allclose(constraint_residual(w, ctx.sample, ctx.target), resid, rtol=0,
                                   atol=max(1e-9, bound))
        assert h_objective_gaussian(sol.lam_star, system) <= 0.0


def _full_rank_context(scale=1.0):
    # J >= L q with a narrow kernel so M is well conditioned
    grids = make_grids(8, 3)
    km = scale * kernel_matrix(Kernel(0.05), grids)
    rng = np.random.default_rng(11)
    x = rng.uniform(1.0, 2.0, (5, 3, 1))
    sample = FunctionalSample(rng.normal(size=(5, 3)), x)
    design = srswor_design(40, 5)
    return MemContext(sample, design, MeanTarget(x.mean(0) * 1.05, 40), km, grids)


def test_scale_equivariance():
    base = _full_rank_context()
    w1, s1 = mem_gaussian_weights(base, 1e-12)
    assert s1.effective_rank == 3 and s1.ls_residual_norm < 1e-9
    for alpha in (0.5, 3.0):
        w2, s2 = mem_gaussian_weights(_full_rank_context(alpha), 1e-12)
        np.testing.assert_allclose(s2.lam_star, s1.lam_star / alpha**2, rtol=1e-9)
        np.testing.assert_allclose(w2.w, w1.w, rtol=1e-10)


def test_target_already_met_gives_design_weights():
    grids = make_grids(3, 2)
    km = kernel_matrix(Kernel(0.5), grids)
    sample = FunctionalSample(np.ones((4, 2)), np.arange(16.0).reshape(4, 2, 2))
    design = srswor_design(8, 4)
    target = MeanTarget(np.einsum("i,ilk->lk", design.d, sample.x) / 8, 8)
    w, sol = mem_gaussian_weights(MemContext(sample, design, target, km, grids))
    assert not sol.lam_star.any()
    assert np.array_equal(w.w, np.full((4, 2), 2.0))
