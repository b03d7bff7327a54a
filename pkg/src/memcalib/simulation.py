"""Monte Carlo comparison of HT and MEM calibration estimators.

Population model (t in (0, 1])::

    Y_i(t) = alpha(t) + X_i1(t) beta_1(t) + X_i2(t) beta_2(t) + eps_i(t)
    X_i1(t) = U_i1 + 3 sin(3 pi t + 3),   U_i1 ~ U[-1, 1.3]
    X_i2(t) = U_i2 - cos(pi t),           U_i2 ~ U[-0.5, 0.5]
    eps_i(t) ~ N(0, sigma_eps2 (1 + t)), independent over i and t

Seeds: the population is drawn from ``SeedSequence([seed, 0])``, the sample
of replication ``r`` from ``SeedSequence([seed, 1, r])`` and, when the
population is regenerated per replication, that population from
``SeedSequence([seed, 2, r])``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calib_chisq import MeanTarget, chisq_weights, weighted_mean
from .core import Kernel, kernel_matrix, make_grids
from .mem_core import MemContext, calibrated_aux_mean
from .mem_gaussian import DEFAULT_RCOND, mem_gaussian_weights
from .mem_poisson import PoissonPrior, PoissonSolveOptions, mem_poisson_weights
from .sampling import FunctionalSample, ht_functional_mean, srswor_design, srswor_sample

ESTIMATORS = ("ht", "mem-gauss", "mem-poisson", "chisq")
DEFAULT_ESTIMATORS = ("ht", "mem-gauss", "mem-poisson")


@dataclass(frozen=True)
class SimConfig:
    N: int = 1000
    sampling_fraction: float = 0.12
    J: int = 50
    L: int = 80
    sigma_eps2: float = 0.1
    kernel_sigma2: float = 0.5
    gamma: float = 1.0
    jump_min: float = -1.0
    jump_max: float = 1.0
    reps: int = 100
    seed: int = 2024
    quadrature_order: int = 40
    rcond: float = DEFAULT_RCOND
    residual_tolerance: float = 1e-6
    max_iterations: int = 500
    fixed_population: bool = True
    estimators: tuple = DEFAULT_ESTIMATORS

    def __post_init__(self):
        for name in ("N", "J", "L", "reps", "quadrature_order", "max_iterations"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in ("sigma_eps2", "kernel_sigma2", "gamma", "residual_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.sampling_fraction <= 1:
            raise ValueError("sampling_fraction must lie in (0, 1]")
        if not 0 < self.rcond < 1:
            raise ValueError("rcond must lie in (0, 1)")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        est = tuple(self.estimators)
        unknown = set(est) - set(ESTIMATORS)
        if unknown or not est:
            raise ValueError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        object.__setattr__(self, "estimators", est)
        if self.n < 1:
            raise ValueError("sampling_fraction * N rounds to an empty sample")

    @property
    def n(self) -> int:
        return int(round(self.sampling_fraction * self.N))

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        data = dict(data)
        if "estimators" in data:
            data["estimators"] = tuple(data["estimators"])
        return cls(**data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["estimators"] = list(self.estimators)
        return d

    def prior(self) -> PoissonPrior:
        return PoissonPrior(self.gamma, self.jump_min, self.jump_max, self.quadrature_order)

    def poisson_options(self) -> PoissonSolveOptions:
        return PoissonSolveOptions(
            max_iterations=self.max_iterations,
            residual_tolerance=self.residual_tolerance,
            subspace_rcond=self.rcond,
        )


def alpha(t):
    t = np.asarray(t, dtype=float)
    return 1.2 + 2.3 * np.cos(2 * np.pi * t) + 4.2 * np.sin(2 * np.pi * t)


def beta(t):
    """Coefficient curves, shape ``t.shape + (2,)``."""
    t = np.asarray(t, dtype=float)
    return np.stack([np.cos(10 * t), t * np.sin(15 * t)], axis=-1)


def aux_shapes(t):
    """Deterministic parts ``f_1, f_2`` of the auxiliary curves."""
    t = np.asarray(t, dtype=float)
    return np.stack([3 * np.sin(3 * np.pi * t + 3), -np.cos(np.pi * t)], axis=-1)


@dataclass(frozen=True)
class Population:
    y: np.ndarray  # N x L
    x: np.ndarray  # N x L x 2
    seed: int


def derive_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1, np.uint64)[0])


def generate_population(config: SimConfig, seed: int) -> Population:
    t = make_grids(config.J, config.L).t_points
    rng = np.random.default_rng(seed)
    u1 = rng.uniform(-1.0, 1.3, config.N)
    u2 = rng.uniform(-0.5, 0.5, config.N)
    x = np.stack([u1[:, None], u2[:, None]], axis=-1) + aux_shapes(t)[None]
    eps = rng.standard_normal((config.N, config.L)) * np.sqrt(config.sigma_eps2 * (1 + t))
    y = alpha(t) + np.einsum("ilk,lk->il", x, beta(t)) + eps
    return Population(y, x, seed)


def population_means(pop: Population) -> tuple[np.ndarray, np.ndarray]:
    """Exact population means ``(mu_x, mu_y)``."""
    return pop.x.mean(axis=0), pop.y.mean(axis=0)


@dataclass
class Replication:
    estimates: dict
    mu_y: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    calibrated_x: dict = field(default_factory=dict)  # N^-1 sum w X per method


class _Setup:
    def __init__(self, config: SimConfig):
        self.grids = make_grids(config.J, config.L)
        self.km = kernel_matrix(Kernel(config.kernel_sigma2), self.grids)
        self.prior = config.prior()
        self.options = config.poisson_options()


def run_replication(pop: Population, config: SimConfig, seed: int, _setup=None) -> Replication:
    """Draw one SRSWOR sample and compute every configured estimator."""
    setup = _setup or _Setup(config)
    n = config.n
    idx = srswor_sample(config.N, n, seed).indices - 1
    sample = FunctionalSample(pop.y[idx], pop.x[idx], ids=tuple(idx + 1))
    design = srswor_design(config.N, n)
    mu_x, mu_y = population_means(pop)
    target = MeanTarget(mu_x, config.N)
    rep = Replication({}, mu_y)
    for method in config.estimators:
        if method == "ht":
            rep.estimates[method] = ht_functional_mean(sample, design)
            continue
        if method == "chisq":
            weights = chisq_weights(sample, design, target)
            rep.diagnostics["chisq_negative_weights"] = weights.negative_count
        else:
            ctx = MemContext(sample, design, target, setup.km, setup.grids)
            if method == "mem-gauss":
                weights, sol = mem_gaussian_weights(ctx, config.rcond)
                rep.diagnostics["gauss_rank"] = sol.effective_rank
                rep.diagnostics["gauss_constraint_max_abs"] = sol.constraint_max_abs
            else:
                weights, sol = mem_poisson_weights(ctx, setup.prior, setup.options)
                rep.diagnostics["poisson_iterations"] = sol.iterations
                rep.diagnostics["poisson_converged"] = sol.converged
                rep.diagnostics["poisson_stationary"] = sol.stationary
                rep.diagnostics["poisson_residual_inf"] = sol.residual_inf_norm
        rep.estimates[method] = weighted_mean(weights, sample, config.N)
        rep.calibrated_x[method] = calibrated_aux_mean(weights, sample, config.N)
    return rep


@dataclass(frozen=True)
class DecompositionRow:
    estimator: str
    mse: float
    bias2: float
    variance: float


def decompose(estimates: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    """Grid-averaged ``(mse, bias2, variance)`` of R x L estimates against the truth.

    ``truth`` is either one curve or one curve per replication. The variance
    uses divisor R so that ``mse == bias2 + variance``.
    """
    err = np.asarray(estimates, dtype=float) - truth
    mean_err = err.mean(axis=0)
    bias2 = float(np.mean(mean_err**2))
    variance = float(np.mean(np.mean((err - mean_err) ** 2, axis=0)))
    return bias2 + variance, bias2, variance


@dataclass
class MonteCarloResult:
    config: SimConfig
    rows: list
    estimates: dict  # method -> R x L array
    truth: np.ndarray  # L (fixed population) or R x L
    mu_x: np.ndarray
    replications: list

    def mean_curves(self) -> dict:
        return {m: e.mean(axis=0) for m, e in self.estimates.items()}


def monte_carlo(config: SimConfig, progress: Callable[[int], None] | None = None) -> MonteCarloResult:
    """Run ``config.reps`` replications and decompose each estimator's MSE."""
    setup = _Setup(config)
    pop = generate_population(config, derive_seed(config.seed, 0))
    reps = []
    for r in range(config.reps):
        if not config.fixed_population:
            pop = generate_population(config, derive_seed(config.seed, 2, r))
        reps.append(run_replication(pop, config, derive_seed(config.seed, 1, r), setup))
        if progress is not None:
            progress(r)
    estimates = {m: np.array([rep.estimates[m] for rep in reps]) for m in config.estimators}
    if config.fixed_population:
        truth = reps[0].mu_y
    else:
        truth = np.array([rep.mu_y for rep in reps])
    mu_x = population_means(pop)[0]  # last population when regenerated
    rows = [DecompositionRow(m, *decompose(estimates[m], truth)) for m in config.estimators]
    return MonteCarloResult(config, rows, estimates, truth, mu_x, reps)
