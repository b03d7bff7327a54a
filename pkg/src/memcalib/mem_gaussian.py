"""MEM calibration under a centered Gaussian prior.

The discretized first-order condition is the linear system ``M lam = r`` with

    M[(l,k), (l',k')] = (J L)^-1 sum_j K(s_j,t_l) K(s_j,t_l') xbar_k(t_l) xbar_k'(t_l')
    r[(l,k)]          = N mu_Xk(t_l) - sum_i d_i X_ik(t_l)

scaled so that ``M lam - r`` is exactly the calibration-constraint residual of
the resulting weights. ``M`` has rank at most J, so with ``L q > J`` it is
singular and the multiplier is taken as the truncated-SVD minimum-norm
least-squares solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calib_chisq import FunctionalWeights
from .core import Grids
from .mem_core import MemContext, coupling_field

# Relative singular-value cutoff. Components of M below 1e-3 * sigma_max are
# dominated by sampling noise in xbar and inflate the estimator's variance.
DEFAULT_RCOND = 1e-3


@dataclass(frozen=True)
class GaussianSystem:
    M: np.ndarray
    r: np.ndarray
    shape: tuple  # (L, q) of the multiplier field


@dataclass(frozen=True)
class GaussianSolution:
    lam_star: np.ndarray  # L x q
    ls_residual_norm: float
    effective_rank: int
    constraint_max_abs: float
    degenerate: bool = False  # M == 0 with r != 0


def assemble_system(ctx: MemContext) -> GaussianSystem:
    A = ctx.coupling
    M = (ctx.grids.L / ctx.grids.J) * (A.T @ A)
    M = 0.5 * (M + M.T)
    return GaussianSystem(M, -ctx.gap0.ravel(), ctx.shape)


def solve_lambda(system: GaussianSystem, rcond: float = DEFAULT_RCOND) -> GaussianSolution:
    """Minimum-norm least-squares solution of ``M lam = r`` by truncated SVD.

    Singular values below ``rcond * sigma_max`` are discarded. An all-zero
    ``M`` gives ``lam = 0`` with ``degenerate=True`` when ``r`` is nonzero.
    """
    if not 0 < rcond < 1:
        raise ValueError(f"rcond must lie in (0, 1), got {rcond}")
    M, r = system.M, system.r
    u, s, vt = np.linalg.svd(M)
    if s.size == 0 or s[0] == 0:
        lam = np.zeros_like(r)
        rank = 0
    else:
        keep = s > rcond * s[0]
        rank = int(keep.sum())
        lam = vt[keep].T @ ((u[:, keep].T @ r) / s[keep])
    resid = M @ lam - r
    return GaussianSolution(
        lam_star=lam.reshape(system.shape),
        ls_residual_norm=float(np.linalg.norm(resid)),
        effective_rank=rank,
        constraint_max_abs=float(np.max(np.abs(resid), initial=0.0)),
        degenerate=bool(rank == 0 and np.any(r != 0)),
    )


def gaussian_adjustment(solution: GaussianSolution, xbar, km, grids: Grids) -> np.ndarray:
    """Adjustment density ``varpi*(s_j)``; it equals the coupling field at ``lam*``."""
    return coupling_field(solution.lam_star, xbar, km, grids)


def h_objective_gaussian(lam, system: GaussianSystem) -> float:
    """Discretized dual objective ``0.5 lam' M lam - r' lam``; gradient ``M lam - r``."""
    lam = np.asarray(lam, dtype=float).ravel()
    return float(0.5 * lam @ system.M @ lam - system.r @ lam)


def h_gradient_gaussian(lam, system: GaussianSystem) -> np.ndarray:
    lam = np.asarray(lam, dtype=float).ravel()
    return (system.M @ lam - system.r).reshape(system.shape)


def mem_gaussian_weights(
    ctx: MemContext, rcond: float = DEFAULT_RCOND
) -> tuple[FunctionalWeights, GaussianSolution]:
    """Assemble, solve and map to weights in one call."""
    solution = solve_lambda(assemble_system(ctx), rcond)
    varpi = gaussian_adjustment(solution, ctx.xbar, ctx.km, ctx.grids)
    return ctx.weights_for(varpi, "mem-gauss"), solution
