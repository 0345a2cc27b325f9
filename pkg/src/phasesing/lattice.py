"""Lattice points on circles, spectral measures and correlation-set counts.

Everything here is exact integer arithmetic except the Fourier coefficients
of the spectral measure, which are computed with iterated complex products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple

import numpy as np

__all__ = [
    "Frequency",
    "EnergyLevel",
    "SpectralMeasure",
    "CorrelationCount",
    "CapExceededError",
    "enumerate_level",
    "require_level",
    "mu_hat",
    "spectral_measure",
    "correlation_count",
    "scan_levels",
]


class Frequency(NamedTuple):
    lambda1: int
    lambda2: int


class CapExceededError(ValueError):
    """Raised when an order-6 count is requested on a level that is too large."""


@dataclass(frozen=True)
class EnergyLevel:
    """A representable integer n together with its lattice points.

    ``points`` is in lexicographic order; every coefficient vector in the
    package is indexed in this order.
    """

    n: int
    points: tuple[Frequency, ...]

    @property
    def multiplicity(self) -> int:
        return len(self.points)

    @property
    def eigenvalue(self) -> float:
        return 4.0 * math.pi**2 * self.n

    @cached_property
    def array(self) -> np.ndarray:
        """Integer array of shape (N, 2)."""
        return np.array(self.points, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def antipode(self) -> np.ndarray:
        """Index map k -> index of -points[k]."""
        index = {p: k for k, p in enumerate(self.points)}
        return np.array([index[Frequency(-a, -b)] for a, b in self.points], dtype=np.intp)

    @cached_property
    def half(self) -> np.ndarray:
        """Indices of one representative per antipodal pair (the lexicographically larger one)."""
        return np.array(
            [k for k, (a, b) in enumerate(self.points) if (a, b) > (-a, -b)], dtype=np.intp
        )

    @property
    def max_frequency(self) -> int:
        """Largest |lambda_j| over the level, i.e. floor(sqrt(n)) when attained."""
        return int(np.abs(self.array).max())

    def moment(self, p1: int, p2: int) -> int:
        """Exact sum of lambda1**p1 * lambda2**p2 over the level."""
        return sum(a**p1 * b**p2 for a, b in self.points)

    def __iter__(self) -> Iterator[Frequency]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SpectralMeasure:
    level: EnergyLevel
    fourth_coefficient: float


@dataclass(frozen=True)
class CorrelationCount:
    order: int
    count: int
    multiplicity: int

    @property
    def normalized_moment(self) -> float:
        """R_n(order) = count / N**order, the integral of r_n**order over the torus."""
        return self.count / self.multiplicity**self.order


def enumerate_level(n: int) -> EnergyLevel | None:
    """Return the level of ``n`` or ``None`` when n is not a sum of two squares."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    pts = set()
    a = 0
    while a * a <= n:
        b = math.isqrt(n - a * a)
        if a * a + b * b == n:
            for s in (1, -1):
                for t in (1, -1):
                    pts.add(Frequency(s * a, t * b))
                    pts.add(Frequency(t * b, s * a))
        a += 1
    if not pts:
        return None
    return EnergyLevel(n=n, points=tuple(sorted(pts)))


def require_level(n: int) -> EnergyLevel:
    level = enumerate_level(n)
    if level is None:
        raise ValueError(f"{n} is not a sum of two squares")
    return level


def mu_hat(level: EnergyLevel, k: int) -> float:
    """Fourier coefficient of the spectral measure at frequency k.

    The imaginary part of the raw sum vanishes by conjugation symmetry of the
    level; this is checked.
    """
    scale = math.sqrt(level.n)
    total = 0j
    for a, b in level.points:
        z = complex(a / scale, b / scale)
        if k < 0:
            z = z.conjugate()
        w = 1 + 0j
        for _ in range(abs(k)):
            w *= z
        total += w
    value = total / level.multiplicity
    assert abs(value.imag) < 1e-12, f"mu_hat({level.n}, {k}) has imaginary part {value.imag}"
    return value.real


def spectral_measure(level: EnergyLevel) -> SpectralMeasure:
    return SpectralMeasure(level=level, fourth_coefficient=mu_hat(level, 4))


def _alternating_sum_counts(pts: np.ndarray, half: int) -> np.ndarray:
    """Multiplicities of the vectors p1 - p2 + p3 - ... over ``half`` factors."""
    sums = np.zeros((1, 2), dtype=np.int64)
    for j in range(half):
        sign = 1 if j % 2 == 0 else -1
        sums = (sums[:, None, :] + sign * pts[None, :, :]).reshape(-1, 2)
    # encode pairs as single integers; |coordinate| <= half * sqrt(n)
    bound = int(np.abs(sums).max()) + 1
    keys = (sums[:, 0] + bound) * (2 * bound + 1) + (sums[:, 1] + bound)
    _, counts = np.unique(keys, return_counts=True)
    return counts


def correlation_count(level: EnergyLevel, order: int, cap: int = 64) -> CorrelationCount:
    """Count tuples in Lambda_n**order whose alternating-sign sum is zero.

    Meet in the middle: a tuple is a solution iff the alternating sum of its
    first half equals the alternating sum of its second half, and both halves
    range over the same multiset of sums (the second half starts with a minus
    sign, i.e. it is lambda''' - lambda'''' + lambda^v for order 6).
    """
    if order not in (4, 6):
        raise ValueError(f"order must be 4 or 6, got {order}")
    N = level.multiplicity
    if order == 6 and N > cap:
        raise CapExceededError(f"order-6 count needs N <= {cap}, level {level.n} has N = {N}")
    counts = _alternating_sum_counts(level.array, order // 2)
    count = int(np.sum(counts.astype(np.int64) ** 2))
    if order == 4:
        assert count == 3 * N * (N - 1), (level.n, count, N)
    return CorrelationCount(order=order, count=count, multiplicity=N)


def scan_levels(lo: int, hi: int) -> Iterator[EnergyLevel]:
    """Representable levels with lo <= n <= hi, in increasing n."""
    for n in range(max(lo, 1), hi + 1):
        level = enumerate_level(n)
        if level is not None:
            yield level
