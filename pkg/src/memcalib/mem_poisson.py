"""MEM calibration under a compound-Poisson prior.

With jump intensity ``gamma`` and jump law ``u``, the adjustment density is

    varpi*(s_j) = gamma * m(c_j),    m(c) = int xi exp(c xi) u(dxi),

and the multiplier solves the nonlinear system "weights built from varpi*
satisfy the calibration constraint". That residual is ``L`` times the
gradient of the convex dual objective

    H(lam) = gamma/J sum_j int (exp(c_j xi) - 1) u(dxi)
             + L^-1 sum_l (sum_i d_i X_i(t_l) - N mu_X(t_l))' lam(t_l).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .calib_chisq import FunctionalWeights
from .core import Grids
from .mem_core import MemContext, coupling_field

EXP_LIMIT = 700.0


class MomentRangeError(OverflowError):
    """``|c| * max|xi|`` is too large for ``exp`` in double precision."""


@dataclass(frozen=True)
class PoissonPrior:
    """Compound-Poisson prior with uniform jumps on ``[jump_min, jump_max]``."""

    gamma: float = 1.0
    jump_min: float = -1.0
    jump_max: float = 1.0
    quadrature_order: int = 40

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.jump_min < 0 < self.jump_max:
            raise ValueError("jump interval must satisfy jump_min < 0 < jump_max")
        if int(self.quadrature_order) != self.quadrature_order or self.quadrature_order < 1:
            raise ValueError("quadrature_order must be a positive integer")

    @property
    def max_abs_jump(self) -> float:
        return max(-self.jump_min, self.jump_max)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes on the jump support and probability weights summing to 1."""
        return _uniform_rule(int(self.quadrature_order), float(self.jump_min), float(self.jump_max))


@functools.lru_cache(maxsize=32)
def _uniform_rule(order, a, b):
    x, w = np.polynomial.legendre.leggauss(order)
    xi = 0.5 * (b - a) * x + 0.5 * (a + b)
    p = 0.5 * w
    xi.flags.writeable = False
    p.flags.writeable = False
    return xi, p


def _exp_terms(prior: PoissonPrior, c):
    c = np.asarray(c, dtype=float)
    if np.any(~np.isfinite(c)) or np.any(np.abs(c) * prior.max_abs_jump > EXP_LIMIT):
        raise MomentRangeError(f"coupling value out of range: max |c| = {np.max(np.abs(c)):.4g}")
    xi, p = prior.nodes()
    return c, xi, p, np.multiply.outer(c, xi)


def xi_moment(prior: PoissonPrior, c):
    """``m(c) = int xi exp(c xi) u(dxi)`` by Gauss-Legendre quadrature."""
    c, xi, p, arg = _exp_terms(prior, c)
    return np.exp(arg) @ (xi * p)


def xi_moment_derivative(prior: PoissonPrior, c):
    """``m'(c) = int xi^2 exp(c xi) u(dxi)``, strictly positive."""
    c, xi, p, arg = _exp_terms(prior, c)
    return np.exp(arg) @ (xi * xi * p)


def xi_cumulant(prior: PoissonPrior, c):
    """``int (exp(c xi) - 1) u(dxi)``; its derivative is :func:`xi_moment`."""
    c, xi, p, arg = _exp_terms(prior, c)
    return np.expm1(arg) @ p


def poisson_adjustment(lam, prior: PoissonPrior, xbar, km, grids: Grids) -> np.ndarray:
    """``varpi*(s_j) = gamma * m(c_j(lam))``."""
    return prior.gamma * xi_moment(prior, coupling_field(lam, xbar, km, grids))


def poisson_residual(lam, prior: PoissonPrior, ctx: MemContext) -> np.ndarray:
    """Calibration-constraint residual (L x q) of the weights implied by ``lam``."""
    varpi = poisson_adjustment(lam, prior, ctx.xbar, ctx.km, ctx.grids)
    return ctx.residual_for(varpi)


def h_objective_poisson(lam, prior: PoissonPrior, ctx: MemContext) -> float:
    lam = np.asarray(lam, dtype=float).reshape(ctx.shape)
    c = coupling_field(lam, ctx.xbar, ctx.km, ctx.grids)
    entropy_part = prior.gamma / ctx.grids.J * float(np.sum(xi_cumulant(prior, c)))
    return entropy_part + float(np.sum(ctx.gap0 * lam)) / ctx.grids.L


def h_gradient_poisson(lam, prior: PoissonPrior, ctx: MemContext) -> np.ndarray:
    """Gradient of :func:`h_objective_poisson`, equal to ``poisson_residual / L``."""
    return poisson_residual(lam, prior, ctx) / ctx.grids.L


@dataclass(frozen=True)
class PoissonSolveOptions:
    """Controls for :func:`solve_lambda_poisson`.

    ``subspace_rcond=None`` solves the full system. A value in (0, 1)
    restricts the multiplier to the eigenvectors of the Gaussian system
    matrix with eigenvalue above ``subspace_rcond * max``, which is the
    truncation used by the Gaussian solver, and solves the projected system.
    """

    max_iterations: int = 500
    residual_tolerance: float = 1e-6
    initial_lambda: np.ndarray | None = None
    subspace_rcond: float | None = None
    memory: int = 10
    sigma_min: float = 1e-10
    sigma_max: float = 1e10
    sufficient_decrease: float = 1e-4
    tau_min: float = 0.1
    tau_max: float = 0.5
    max_backtracks: int = 40
    stagnation_window: int = 30
    newton_rcond: float = 1e-12

    def __post_init__(self):
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.subspace_rcond is not None and not 0 < self.subspace_rcond < 1:
            raise ValueError("subspace_rcond must lie in (0, 1)")


@dataclass(frozen=True)
class PoissonSolution:
    lam_star: np.ndarray  # L x q
    residual_inf_norm: float
    iterations: int
    converged: bool
    stationary: bool = False
    projected_residual_inf_norm: float = np.nan
    newton_steps: int = 0
    subspace_dim: int = 0
    history: tuple = field(default=(), repr=False)


class _Projected:
    """The residual map restricted to ``lam = V theta`` and projected by ``V'``."""

    def __init__(self, ctx: MemContext, prior: PoissonPrior, rcond):
        self.ctx, self.prior = ctx, prior
        A = ctx.coupling
        self.scale = ctx.grids.L / ctx.grids.J
        if rcond is None:
            self.V = None
        else:
            ev, vecs = np.linalg.eigh(self.scale * (A.T @ A))
            top = ev.max(initial=0.0)
            self.V = vecs[:, ev > rcond * top] if top > 0 else vecs[:, :0]

    @property
    def dim(self):
        return self.ctx.coupling.shape[1] if self.V is None else self.V.shape[1]

    def lam(self, theta):
        return theta if self.V is None else self.V @ theta

    def theta(self, lam):
        lam = np.ravel(lam)
        return lam.copy() if self.V is None else self.V.T @ lam

    def full(self, theta):
        return poisson_residual(self.lam(theta), self.prior, self.ctx).ravel()

    def project(self, F):
        return F if self.V is None else self.V.T @ F

    def jacobian(self, theta):
        A = self.ctx.coupling
        c = A @ self.lam(theta)
        AV = A if self.V is None else A @ self.V
        dm = xi_moment_derivative(self.prior, c)
        return self.scale * self.prior.gamma * (AV.T * dm) @ AV


def solve_lambda_poisson(
    ctx: MemContext,
    prior: PoissonPrior,
    options: PoissonSolveOptions | None = None,
) -> PoissonSolution:
    """Solve the Poisson calibration system with a spectral residual method.

    Derivative-free spectral residual iteration (DF-SANE) with a
    nonmonotone line search that tries both ``+/-`` the spectral direction.
    When the merit ``||G||^2`` stagnates or the line search fails, the
    solver switches to Newton steps with the analytic Jacobian, solved by
    truncated least squares and safeguarded by backtracking.

    The returned iterate is the best one seen. ``converged`` means the full
    calibration residual has infinity norm at most ``residual_tolerance``;
    ``stationary`` means the (possibly projected) system was solved to that
    tolerance. They coincide when no subspace restriction is used.
    """
    opts = options or PoissonSolveOptions()
    prob = _Projected(ctx, prior, opts.subspace_rcond)
    lam0 = np.zeros(ctx.shape) if opts.initial_lambda is None else opts.initial_lambda
    lam0 = np.asarray(lam0, dtype=float)
    if lam0.size != ctx.xbar.size:
        raise ValueError(f"initial_lambda has {lam0.size} entries, expected {ctx.xbar.size}")
    tol = opts.residual_tolerance

    def evaluate(theta):
        try:
            F = prob.full(theta)
        except MomentRangeError:
            return None, None, np.inf
        with np.errstate(over="ignore", invalid="ignore"):
            G = prob.project(F)
            f = float(G @ G)
        if not np.isfinite(f):
            return None, None, np.inf
        return F, G, f

    theta = prob.theta(lam0)
    F, G, f = evaluate(theta)
    if F is None:
        raise MomentRangeError("initial multiplier is out of range")
    best = (f, theta, F, G)
    history = [float(np.max(np.abs(G), initial=0.0))]
    it = 0
    newton_steps = 0

    def done(G):
        return np.max(np.abs(G), initial=0.0) <= tol

    # spectral residual phase
    sigma = 1.0 / max(1.0, np.sqrt(f))
    merits = [f]
    eta0 = f
    last_gain = 0
    use_newton = False
    while not done(G) and it < opts.max_iterations:
        direction = -sigma * G
        fmax = max(merits[-opts.memory:])
        eta = eta0 / (1.0 + it) ** 2
        ap = am = 1.0
        accepted = None
        for _ in range(opts.max_backtracks):
            trial = theta + ap * direction
            Ft, Gt, ft = evaluate(trial)
            if ft <= fmax + eta - opts.sufficient_decrease * ap * ap * f:
                accepted = (trial, Ft, Gt, ft)
                break
            trial_m = theta - am * direction
            Fm, Gm, fm = evaluate(trial_m)
            if fm <= fmax + eta - opts.sufficient_decrease * am * am * f:
                accepted = (trial_m, Fm, Gm, fm)
                break
            ap = _shrink(ap, f, ft, opts)
            am = _shrink(am, f, fm, opts)
        it += 1
        if accepted is None:
            use_newton = True
            break
        new_theta, F_new, G_new, f_new = accepted
        s = new_theta - theta
        y = G_new - G
        sy = float(s @ y)
        sigma = float(s @ s) / sy if sy > 0 else 1.0
        sigma = min(max(sigma, opts.sigma_min), opts.sigma_max)
        theta, F, G, f = new_theta, F_new, G_new, f_new
        merits.append(f)
        history.append(float(np.max(np.abs(G), initial=0.0)))
        if f < best[0] * (1.0 - 1e-3):
            last_gain = it
        if f < best[0]:
            best = (f, theta, F, G)
        if it - last_gain >= opts.stagnation_window:
            use_newton = True
            break

    # Newton fallback from the best iterate
    if use_newton:
        f, theta, F, G = best
        while not done(G) and it < opts.max_iterations:
            Jg = prob.jacobian(theta)
            step = np.linalg.lstsq(Jg, -G, rcond=opts.newton_rcond)[0]
            t = 1.0
            moved = False
            for _ in range(opts.max_backtracks):
                Ft, Gt, ft = evaluate(theta + t * step)
                if ft <= (1.0 - opts.sufficient_decrease * t) * f:
                    theta, F, G, f = theta + t * step, Ft, Gt, ft
                    moved = True
                    break
                t *= 0.5
            it += 1
            newton_steps += 1
            if not moved:
                break
            history.append(float(np.max(np.abs(G), initial=0.0)))
            if f < best[0]:
                best = (f, theta, F, G)

    f, theta, F, G = best
    lam = prob.lam(theta).reshape(ctx.shape)
    res_inf = float(np.max(np.abs(F), initial=0.0))
    proj_inf = float(np.max(np.abs(G), initial=0.0))
    return PoissonSolution(
        lam_star=lam,
        residual_inf_norm=res_inf,
        iterations=it,
        converged=res_inf <= tol,
        stationary=proj_inf <= tol,
        projected_residual_inf_norm=proj_inf,
        newton_steps=newton_steps,
        subspace_dim=prob.dim,
        history=tuple(history),
    )


def _shrink(alpha, f0, ft, opts):
    # safeguarded quadratic interpolation of the merit along the step
    if not np.isfinite(ft):
        return opts.tau_min * alpha
    denom = ft + (2.0 * alpha - 1.0) * f0
    trial = alpha * alpha * f0 / denom if denom > 0 else opts.tau_min * alpha
    return min(max(trial, opts.tau_min * alpha), opts.tau_max * alpha)


def mem_poisson_weights(
    ctx: MemContext,
    prior: PoissonPrior,
    options: PoissonSolveOptions | None = None,
) -> tuple[FunctionalWeights, PoissonSolution]:
    solution = solve_lambda_poisson(ctx, prior, options)
    varpi = poisson_adjustment(solution.lam_star, prior, ctx.xbar, ctx.km, ctx.grids)
    return ctx.weights_for(varpi, "mem-poisson"), solution
