"""Chi-square functional calibration and its regression (GREG) form.

At each grid time ``t_l`` the weights minimizing
``sum_i (w_i - d_i)**2 / (2 d_i q_i)`` subject to
``N^-1 sum_i w_i X_i = mu_X`` have the closed form

    w_i = d_i * (1 + q_i * X_i' T^-1 (N mu_X - sum_i d_i X_i)),
    T   = sum_i d_i q_i X_i X_i'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import DimensionError, FunctionalSample, SamplingDesign, _check_design

RCOND_MIN = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    """The pointwise q x q moment matrix is numerically singular."""

    def __init__(self, index: int, rcond: float):
        self.index = index
        self.rcond = rcond
        super().__init__(
            f"moment matrix singular at grid index {index} (reciprocal condition {rcond:.3g})"
        )


@dataclass(frozen=True)
class FunctionalWeights:
    """Calibration weights ``w[i, l] = w_i(t_l)`` and the method that produced them."""

    w: np.ndarray
    source: str = ""

    @property
    def negative_count(self) -> int:
        return int(np.count_nonzero(self.w < 0))

    def max_p_deviation(self, design: SamplingDesign) -> float:
        """``max |pi_i w_i(t) - 1|``; reported only, never enforced."""
        return float(np.max(np.abs(design.pi[:, None] * self.w - 1.0)))


@dataclass(frozen=True)
class MeanTarget:
    """Known population auxiliary mean curves ``mu_x`` (L x q)."""

    mu_x: np.ndarray
    N: int

    def __post_init__(self):
        mu = np.asarray(self.mu_x, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        if mu.ndim != 2 or not np.all(np.isfinite(mu)):
            raise ValueError("mu_x must be a finite L x q array")
        object.__setattr__(self, "mu_x", mu)


def _q_weights(sample: FunctionalSample, qw) -> np.ndarray:
    if qw is None:
        return np.ones((sample.n, sample.L))
    qw = np.asarray(qw, dtype=float)
    if qw.shape != (sample.n, sample.L):
        raise DimensionError(f"q weights shape {qw.shape}, expected {(sample.n, sample.L)}")
    if np.any(qw <= 0):
        raise ValueError("q weights must be positive")
    return qw


def _check_target(sample: FunctionalSample, target: MeanTarget):
    if target.mu_x.shape != (sample.L, sample.q):
        raise DimensionError(
            f"mu_x shape {target.mu_x.shape}, expected {(sample.L, sample.q)}"
        )


def _moment_matrices(sample, design, qw):
    dq = design.d[:, None] * qw  # n x L
    T = np.einsum("il,ilk,ilm->lkm", dq, sample.x, sample.x)
    with np.errstate(divide="ignore", invalid="ignore"):
        rcond = 1.0 / np.linalg.cond(T)
    bad = np.flatnonzero(~(rcond >= RCOND_MIN))
    if bad.size:
        raise SingularMatrixError(int(bad[0]), float(rcond[bad[0]]))
    return dq, T


def pointwise_beta_hat(sample: FunctionalSample, design: SamplingDesign, qw=None) -> np.ndarray:
    """Weighted least-squares coefficient curve ``beta_hat(t_l)``, shape L x q.

    Raises
    ------
    SingularMatrixError
        If ``sum_i d_i q_i X_i X_i'`` has reciprocal condition number below
        1e-12 at some grid index.
    """
    _check_design(sample, design)
    qw = _q_weights(sample, qw)
    dq, T = _moment_matrices(sample, design, qw)
    rhs = np.einsum("il,ilk,il->lk", dq, sample.x, sample.y)
    return np.linalg.solve(T, rhs[..., None])[..., 0]


def chisq_weights(
    sample: FunctionalSample,
    design: SamplingDesign,
    target: MeanTarget,
    qw=None,
) -> FunctionalWeights:
    """Closed-form chi-square calibration weights (n x L).

    ``qw`` defaults to the constant 1. Weights may be negative; see
    :attr:`FunctionalWeights.negative_count`.
    """
    _check_design(sample, design)
    _check_target(sample, target)
    qw = _q_weights(sample, qw)
    dq, T = _moment_matrices(sample, design, qw)
    gap = target.N * target.mu_x - np.einsum("i,ilk->lk", design.d, sample.x)
    lam = np.linalg.solve(T, gap[..., None])[..., 0]
    w = design.d[:, None] + dq * np.einsum("ilk,lk->il", sample.x, lam)
    return FunctionalWeights(w, "chisq")


def weighted_mean(weights: FunctionalWeights, sample: FunctionalSample, N: int) -> np.ndarray:
    """Linear weighted estimator ``N^-1 sum_i w_i(t_l) Y_i(t_l)``."""
    w = np.asarray(weights.w)
    if w.shape != sample.y.shape:
        raise DimensionError(f"weights shape {w.shape}, sample shape {sample.y.shape}")
    return np.einsum("il,il->l", w, sample.y) / N
