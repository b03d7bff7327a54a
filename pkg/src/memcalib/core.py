"""Discretization grids and kernels shared by every solver."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grids:
    """Equispaced right-endpoint grids ``s_j = j/J`` and ``t_l = l/L`` on (0, 1]."""

    J: int
    L: int
    s_points: np.ndarray = field(repr=False)
    t_points: np.ndarray = field(repr=False)


def make_grids(J: int, L: int) -> Grids:
    """Build the s-grid (J points) and t-grid (L points)."""
    for name, value in (("J", J), ("L", L)):
        if isinstance(value, bool) or int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")
    J, L = int(J), int(L)
    s = np.arange(1, J + 1) / J
    t = np.arange(1, L + 1) / L
    s.flags.writeable = False
    t.flags.writeable = False
    return Grids(J, L, s, t)


class KernelKind(enum.Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Kernel:
    """Smoothing kernel ``K(s, t)``; only the Gaussian kind is defined.

    The Gaussian kernel is ``exp(-(t - s)**2 / (2 * sigma2))``.
    """

    sigma2: float = 0.5
    kind: KernelKind = KernelKind.GAUSSIAN

    def __post_init__(self):
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind is KernelKind.GAUSSIAN:
            return np.exp(-((t - s) ** 2) / (2.0 * self.sigma2))
        raise NotImplementedError(self.kind)


def kernel_eval(kernel: Kernel, s: float, t: float) -> float:
    return float(kernel(s, t))


def kernel_matrix(kernel: Kernel, grids: Grids) -> np.ndarray:
    """Return the J x L matrix with entry (j, l) equal to ``K(s_j, t_l)``."""
    km = kernel(grids.s_points[:, None], grids.t_points[None, :])
    km.flags.writeable = False
    return km
