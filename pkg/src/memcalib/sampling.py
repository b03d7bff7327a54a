"""Finite-population bookkeeping, SRSWOR and the functional HT estimator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DimensionError(ValueError):
    """Array shapes do not agree."""


@dataclass(frozen=True)
class SamplingDesign:
    """Population size, sample size and per-unit inclusion probabilities.

    ``d`` holds the design weights ``1 / pi``.
    """

    N: int
    n: int
    pi: np.ndarray
    d: np.ndarray

    @classmethod
    def from_pi(cls, N: int, pi) -> "SamplingDesign":
        pi = np.asarray(pi, dtype=float).ravel()
        if pi.size == 0:
            raise ValueError("empty sample")
        if np.any(~np.isfinite(pi)) or np.any(pi <= 0) or np.any(pi > 1):
            raise ValueError("inclusion probabilities must lie in (0, 1]")
        if pi.size > N:
            raise ValueError(f"sample size {pi.size} exceeds population size {N}")
        return cls(int(N), int(pi.size), pi, 1.0 / pi)


@dataclass(frozen=True)
class SampleIndices:
    indices: np.ndarray  # 1-based unit labels
    seed: int


@dataclass(frozen=True)
class FunctionalSample:
    """Sampled survey curves ``y`` (n x L) and auxiliary curves ``x`` (n x L x q)."""

    y: np.ndarray
    x: np.ndarray
    ids: tuple

    def __init__(self, y, x, ids: Sequence | None = None):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        if y.ndim != 2:
            raise DimensionError(f"y must be n x L, got shape {y.shape}")
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[:2] != y.shape or x.shape[2] < 1:
            raise DimensionError(f"x shape {x.shape} inconsistent with y shape {y.shape}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("sample curves must be finite")
        if ids is None:
            ids = range(1, y.shape[0] + 1)
        ids = tuple(ids)
        if len(ids) != y.shape[0]:
            raise DimensionError(f"{len(ids)} ids for {y.shape[0]} units")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def L(self) -> int:
        return self.y.shape[1]

    @property
    def q(self) -> int:
        return self.x.shape[2]


def _check_sizes(N, n):
    if int(N) != N or int(n) != n:
        raise ValueError("sizes must be integers")
    if n < 1 or N < 1:
        raise ValueError(f"sizes must be positive, got N={N}, n={n}")
    if n > N:
        raise ValueError(f"sample size n={n} exceeds population size N={N}")


def srswor_design(N: int, n: int) -> SamplingDesign:
    """Simple random sampling without replacement: ``pi_i = n/N`` for every unit."""
    _check_sizes(N, n)
    return SamplingDesign.from_pi(N, np.full(int(n), n / N))


def srswor_sample(N: int, n: int, seed: int) -> SampleIndices:
    """Draw ``n`` distinct labels from ``1..N`` by a partial Fisher-Yates shuffle.

    Every one of the ``C(N, n)`` subsets is equally likely and the draw is a
    pure function of ``seed``.
    """
    _check_sizes(N, n)
    N, n = int(N), int(n)
    rng = np.random.default_rng(seed)
    labels = np.arange(1, N + 1)
    for k in range(n):
        j = int(rng.integers(k, N))
        labels[k], labels[j] = labels[j], labels[k]
    return SampleIndices(labels[:n].copy(), seed)


def _check_design(sample: FunctionalSample, design: SamplingDesign):
    if design.d.shape != (sample.n,):
        raise DimensionError(f"design has {design.d.size} weights for {sample.n} units")


def ht_functional_mean(sample: FunctionalSample, design: SamplingDesign) -> np.ndarray:
    """Horvitz-Thompson curve ``N^-1 sum_i d_i Y_i(t_l)``."""
    _check_design(sample, design)
    d = np.broadcast_to(design.d[:, None], sample.y.shape)
    return np.einsum("il,il->l", d, sample.y) / design.N


def ht_aux_mean(sample: FunctionalSample, design: SamplingDesign) -> np.ndarray:
    """Horvitz-Thompson estimate of the auxiliary mean, L x q."""
    _check_design(sample, design)
    return np.einsum("i,ilk->lk", design.d, sample.x) / design.N
