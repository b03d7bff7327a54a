"""Machinery shared by the MEM calibration solvers.

Both priors produce weights of the form

    w_i(t_l) = J^-1 sum_j K(s_j, t_l) varpi(s_j) + d_i

where the adjustment density ``varpi`` is common to every sampled unit and
depends on the multiplier field ``lam`` (L x q) only through the coupling
field ``c_j = L^-1 sum_l K(s_j, t_l) lam(t_l)' xbar(t_l)``, with ``xbar`` the
unweighted sum of the sampled auxiliary curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calib_chisq import FunctionalWeights, MeanTarget, _check_target
from .core import Grids
from .sampling import DimensionError, FunctionalSample, SamplingDesign, _check_design


def sample_aux_sum(sample: FunctionalSample) -> np.ndarray:
    """``xbar(t_l) = sum_i X_i(t_l)``, shape L x q."""
    return sample.x.sum(axis=0)


def _check_km(km: np.ndarray, grids: Grids):
    if km.shape != (grids.J, grids.L):
        raise DimensionError(f"kernel matrix shape {km.shape}, expected {(grids.J, grids.L)}")


def coupling_field(lam, xbar: np.ndarray, km: np.ndarray, grids: Grids) -> np.ndarray:
    """``c_j = L^-1 sum_l K(s_j, t_l) lam(t_l)' xbar(t_l)`` for j = 1..J."""
    _check_km(km, grids)
    lam = np.asarray(lam, dtype=float).reshape(xbar.shape)
    return km @ np.einsum("lk,lk->l", lam, xbar) / grids.L


def adjustment_curve(varpi, km: np.ndarray, grids: Grids) -> np.ndarray:
    """``J^-1 sum_j K(s_j, t_l) varpi(s_j)``, the common weight shift per t_l."""
    _check_km(km, grids)
    varpi = np.asarray(varpi, dtype=float)
    if varpi.shape != (grids.J,):
        raise DimensionError(f"adjustment density has shape {varpi.shape}, expected ({grids.J},)")
    return varpi @ km / grids.J


def weights_from_adjustment(
    varpi, km: np.ndarray, grids: Grids, design: SamplingDesign
) -> FunctionalWeights:
    shift = adjustment_curve(varpi, km, grids)
    return FunctionalWeights(design.d[:, None] + shift[None, :], "mem")


def constraint_residual(
    weights: FunctionalWeights, sample: FunctionalSample, target: MeanTarget
) -> np.ndarray:
    """``sum_i w_i(t_l) X_i(t_l) - N mu_X(t_l)``, shape L x q; zero iff calibrated."""
    _check_target(sample, target)
    w = np.asarray(weights.w)
    if w.shape != sample.y.shape:
        raise DimensionError(f"weights shape {w.shape}, sample shape {sample.y.shape}")
    return np.einsum("il,ilk->lk", w, sample.x) - target.N * target.mu_x


def calibrated_aux_mean(weights: FunctionalWeights, sample: FunctionalSample, N: int) -> np.ndarray:
    """``N^-1 sum_i w_i(t) X_i(t)``, to be plotted against ``mu_X``."""
    return np.einsum("il,ilk->lk", np.asarray(weights.w), sample.x) / N


@dataclass(frozen=True)
class MemContext:
    """Everything a MEM solver needs about one sample, precomputed once.

    ``coupling`` is the J x (L q) matrix mapping the flattened multiplier to
    the coupling field, and ``gap0`` is the constraint residual of the design
    weights, ``sum_i d_i X_i - N mu_X`` (L x q).
    """

    sample: FunctionalSample
    design: SamplingDesign
    target: MeanTarget
    km: np.ndarray
    grids: Grids
    xbar: np.ndarray = field(init=False, repr=False)
    gap0: np.ndarray = field(init=False, repr=False)
    coupling: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_design(self.sample, self.design)
        _check_target(self.sample, self.target)
        _check_km(self.km, self.grids)
        if self.sample.L != self.grids.L:
            raise DimensionError(f"sample has {self.sample.L} time points, grid has {self.grids.L}")
        xbar = sample_aux_sum(self.sample)
        gap0 = np.einsum("i,ilk->lk", self.design.d, self.sample.x) - self.target.N * self.target.mu_x
        coupling = (self.km[:, :, None] * xbar[None, :, :]).reshape(self.grids.J, -1) / self.grids.L
        object.__setattr__(self, "xbar", xbar)
        object.__setattr__(self, "gap0", gap0)
        object.__setattr__(self, "coupling", coupling)

    @property
    def shape(self) -> tuple:
        return self.xbar.shape

    def residual_for(self, varpi) -> np.ndarray:
        """Constraint residual (L x q) of the weights built from ``varpi``."""
        shift = adjustment_curve(varpi, self.km, self.grids)
        return shift[:, None] * self.xbar + self.gap0

    def weights_for(self, varpi, source: str) -> FunctionalWeights:
        w = weights_from_adjustment(varpi, self.km, self.grids, self.design)
        return FunctionalWeights(w.w, source)
