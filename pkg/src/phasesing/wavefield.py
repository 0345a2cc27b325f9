"""Complex arithmetic random waves on the unit torus.

A wave of order n is Theta = T + i*That where

    T(x)    = N**-0.5 * sum_lambda a_lambda    * exp(2 pi i <lambda, x>)
    That(x) = N**-0.5 * sum_lambda ahat_lambda * exp(2 pi i <lambda, x>)

with a_{-lambda} = conj(a_lambda), so both components are real. Sums run over
the level in its canonical order with a plain sequential accumulator, which
makes grid and pointwise evaluation agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .lattice import EnergyLevel, Frequency

__all__ = [
    "WaveSample",
    "FieldJet",
    "GridJets",
    "CovarianceJet",
    "OriginExclusionError",
    "sample_wave",
    "sample_coefficients",
    "deterministic_wave",
    "evaluate",
    "evaluate_points",
    "evaluate_grid",
    "evaluate_theta",
    "covariance",
    "one_minus_r",
    "origin_exclusion_check",
    "exact_grid_size",
    "ceil_sqrt",
]

IMAG_TOL = 1e-9


class OriginExclusionError(RuntimeError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WaveSample:
    """One realization: coefficient families indexed like ``level.points``."""

    level: EnergyLevel
    coeff_a: np.ndarray
    coeff_ahat: np.ndarray

    def __post_init__(self):
        N = self.level.multiplicity
        for name in ("coeff_a", "coeff_ahat"):
            c = np.asarray(getattr(self, name), dtype=np.complex128)
            if c.shape != (N,):
                raise ValueError(f"{name} must have shape ({N},), got {c.shape}")
            if not np.array_equal(c[self.level.antipode], np.conj(c)):
                raise ValueError(f"{name} is not conjugate symmetric")
            object.__setattr__(self, name, _frozen(c))

    def a(self, freq: Frequency) -> complex:
        return complex(self.coeff_a[self.level.points.index(tuple(freq))])

    def ahat(self, freq: Frequency) -> complex:
        return complex(self.coeff_ahat[self.level.points.index(tuple(freq))])

    def __eq__(self, other):
        if not isinstance(other, WaveSample):
            return NotImplemented
        return (
            self.level == other.level
            and np.array_equal(self.coeff_a, other.coeff_a)
            and np.array_equal(self.coeff_ahat, other.coeff_ahat)
        )


@dataclass(frozen=True)
class FieldJet:
    t: float
    that: float
    grad_t: tuple[float, float]
    grad_that: tuple[float, float]
    norm_grad_t: tuple[float, float]
    norm_grad_that: tuple[float, float]


@dataclass(frozen=True)
class CovarianceJet:
    r: float
    grad: tuple[float, float]
    hess: tuple[tuple[float, float], tuple[float, float]]


@dataclass(frozen=True, eq=False)
class GridJets:
    """Field values and gradients on the grid x = (i/m, j/m), arrays indexed [i, j]."""

    m: int
    eigenvalue: float
    t: np.ndarray
    that: np.ndarray
    dt1: np.ndarray
    dt2: np.ndarray
    dth1: np.ndarray
    dth2: np.ndarray

    @property
    def scale(self) -> float:
        return math.sqrt(2.0 / self.eigenvalue)

    def normalized(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(d~1 T, d~2 T, d~1 That, d~2 That) on the grid."""
        s = self.scale
        return self.dt1 * s, self.dt2 * s, self.dth1 * s, self.dth2 * s

    def jet(self, i: int, j: int) -> FieldJet:
        s = self.scale
        g = (float(self.dt1[i, j]), float(self.dt2[i, j]))
        gh = (float(self.dth1[i, j]), float(self.dth2[i, j]))
        return FieldJet(
            t=float(self.t[i, j]),
            that=float(self.that[i, j]),
            grad_t=g,
            grad_that=gh,
            norm_grad_t=(g[0] * s, g[1] * s),
            norm_grad_that=(gh[0] * s, gh[1] * s),
        )

    def csv_rows(self):
        """Rows ``x1,x2,t,that,dt1,dt2,dth1,dth2`` in row-major grid order."""
        for i in range(self.m):
            for j in range(self.m):
                yield (
                    i / self.m, j / self.m,
                    self.t[i, j], self.that[i, j],
                    self.dt1[i, j], self.dt2[i, j],
                    self.dth1[i, j], self.dth2[i, j],
                )


# -- sampling ---------------------------------------------------------------


def sample_coefficients(level: EnergyLevel, rng: np.random.Generator, size: int | None = None):
    """Draw coefficient families (a, ahat) for ``size`` independent waves.

    Returns complex arrays of shape (N,) or (size, N). Each antipodal pair
    receives one complex Gaussian with independent N(0, 1/2) parts; the
    partner is its conjugate. The a family is drawn before the ahat family.
    """
    shape = () if size is None else (size,)
    half = level.half
    anti = level.antipode[half]
    out = []
    for _ in range(2):
        z = rng.standard_normal(shape + (len(half), 2)) * math.sqrt(0.5)
        w = z[..., 0] + 1j * z[..., 1]
        c = np.empty(shape + (level.multiplicity,), dtype=np.complex128)
        c[..., half] = w
        c[..., anti] = np.conj(w)
        out.append(c)
    return out[0], out[1]


def sample_wave(level: EnergyLevel, rng: np.random.Generator) -> WaveSample:
    a, ahat = sample_coefficients(level, rng)
    return WaveSample(level, a, ahat)


def _mirror(level: EnergyLevel, assignments: Mapping | None) -> np.ndarray:
    c = np.zeros(level.multiplicity, dtype=np.complex128)
    seen = np.zeros(level.multiplicity, dtype=bool)
    index = {p: k for k, p in enumerate(level.points)}
    for freq, value in (assignments or {}).items():
        freq = Frequency(*freq)
        if freq not in index:
            raise ValueError(f"{tuple(freq)} is not a lattice point of level {level.n}")
        k = index[freq]
        kk = level.antipode[k]
        value = complex(value)
        if seen[k] and c[k] != value:
            raise ValueError(f"conflicting values for {tuple(freq)}")
        if kk == k and value.imag != 0:
            raise ValueError(f"self-antipodal point {tuple(freq)} needs a real value")
        c[k] = value
        c[kk] = value.conjugate()
        seen[k] = seen[kk] = True
    return c


def deterministic_wave(
    level: EnergyLevel,
    assignments: Mapping | None = None,
    assignments_hat: Mapping | None = None,
) -> WaveSample:
    """Build a wave from coefficients given on (at least) half of the level.

    Missing antipodal partners are filled in by conjugation; unspecified pairs
    are zero. Giving both lambda and -lambda with non-conjugate values raises
    ``ValueError``.
    """
    return WaveSample(level, _mirror(level, assignments), _mirror(level, assignments_hat))


# -- evaluation -------------------------------------------------------------


def _characters(freqs: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """exp(2 pi i f x) for coords (P,) and freqs (N,), shape (P, N)."""
    phase = np.mod(np.multiply.outer(coords, freqs.astype(np.float64)), 1.0)
    return np.exp(2j * np.pi * phase)


def _synthesize(level: EnergyLevel, coeffs: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Sum coeffs[f, k] * e_k(x1[p], x2[q]) over k in canonical order.

    Returns shape (F, P, Q). Shapes of x1/x2 do not change the per-element
    arithmetic, so any sub-grid reproduces the values of the full grid.
    """
    lam = level.array
    e1 = _characters(lam[:, 0], np.asarray(x1, dtype=np.float64))
    e2 = _characters(lam[:, 1], np.asarray(x2, dtype=np.float64))
    acc = np.zeros((coeffs.shape[0], e1.shape[0], e2.shape[0]), dtype=np.complex128)
    for k in range(lam.shape[0]):
        basis = np.multiply.outer(e1[:, k], e2[:, k])
        acc += coeffs[:, k, None, None] * basis[None]
    return acc


def _jet_coefficients(sample: WaveSample) -> np.ndarray:
    level = sample.level
    lam = level.array.astype(np.float64)
    c = 1.0 / math.sqrt(level.multiplicity)
    a = sample.coeff_a * c
    ah = sample.coeff_ahat * c
    d1 = 2j * np.pi * lam[:, 0]
    d2 = 2j * np.pi * lam[:, 1]
    return np.stack([a, ah, d1 * a, d2 * a, d1 * ah, d2 * ah])


def _real(z: np.ndarray) -> np.ndarray:
    resid = np.max(np.abs(z.imag)) if z.size else 0.0
    assert resid <= IMAG_TOL, f"imaginary residue {resid:.3e} after symmetric summation"
    return np.ascontiguousarray(z.real)


def evaluate_grid(sample: WaveSample, m: int) -> GridJets:
    if m < 1:
        raise ValueError("grid size must be >= 1")
    xs = np.arange(m) / m
    vals = _real(_synthesize(sample.level, _jet_coefficients(sample), xs, xs))
    return GridJets(m, sample.level.eigenvalue, *vals)


def evaluate(sample: WaveSample, x) -> FieldJet:
    x1, x2 = float(x[0]), float(x[1])
    vals = _real(_synthesize(sample.level, _jet_coefficients(sample), np.array([x1]), np.array([x2])))
    g = GridJets(1, sample.level.eigenvalue, *vals)
    return g.jet(0, 0)


def evaluate_points(sample: WaveSample, x1, x2, derivatives: bool = True) -> np.ndarray:
    """Values on the tensor grid x1 x x2 (both 1-D arrays).

    Returns (6, P, Q) = (T, That, d1T, d2T, d1That, d2That), or (2, P, Q)
    without derivatives.
    """
    coeffs = _jet_coefficients(sample)
    if not derivatives:
        coeffs = coeffs[:2]
    return _real(_synthesize(sample.level, coeffs, np.atleast_1d(x1), np.atleast_1d(x2)))


def evaluate_theta(sample: WaveSample, x1, x2) -> np.ndarray:
    """Complex field T + i That on the tensor grid x1 x x2, shape (P, Q)."""
    c = (sample.coeff_a + 1j * sample.coeff_ahat) / math.sqrt(sample.level.multiplicity)
    return _synthesize(sample.level, c[None, :], np.atleast_1d(x1), np.atleast_1d(x2))[0]


def exact_grid_size(level: EnergyLevel, degree: int) -> int:
    """Grid size integrating products of ``degree`` field factors exactly."""
    return 2 * degree * ceil_sqrt(level.n) + 1


def ceil_sqrt(n: int) -> int:
    return math.isqrt(n - 1) + 1 if n > 0 else 0


# -- covariance -------------------------------------------------------------


def _phases(level: EnergyLevel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lam = level.array.astype(np.float64)
    return 2 * np.pi * (x[..., 0, None] * lam[:, 0] + x[..., 1, None] * lam[:, 1])


def covariance_arrays(level: EnergyLevel, x):
    """Vectorized r, grad r, Hessian of r at points x of shape (..., 2).

    Returns (r, r1, r2, r11, r12, r22), each of shape x.shape[:-1].
    """
    th = _phases(level, x)
    lam = level.array.astype(np.float64)
    N = level.multiplicity
    c, s = np.cos(th), np.sin(th)
    tp = 2 * np.pi
    r = c.sum(-1) / N
    r1 = -tp * (s * lam[:, 0]).sum(-1) / N
    r2 = -tp * (s * lam[:, 1]).sum(-1) / N
    r11 = -tp**2 * (c * lam[:, 0] ** 2).sum(-1) / N
    r12 = -tp**2 * (c * lam[:, 0] * lam[:, 1]).sum(-1) / N
    r22 = -tp**2 * (c * lam[:, 1] ** 2).sum(-1) / N
    return r, r1, r2, r11, r12, r22


def one_minus_r(level: EnergyLevel, x) -> np.ndarray:
    """1 - r_n(x) without cancellation: (2/N) sum sin^2(pi <lambda, x>)."""
    th = _phases(level, x)
    return 2.0 * np.sum(np.sin(th / 2) ** 2, axis=-1) / level.multiplicity


def covariance(level: EnergyLevel, x) -> CovarianceJet:
    r, r1, r2, r11, r12, r22 = (float(v) for v in covariance_arrays(level, np.asarray(x, float)))
    return CovarianceJet(r=r, grad=(r1, r2), hess=((r11, r12), (r12, r22)))


def origin_exclusion_check(level: EnergyLevel, half_width: int = 100) -> float:
    """Margin delta with |r_n| <= 1 - delta on the punctured square |x|,|y| <= c_n.

    c_n = 1/(1000 sqrt(n)). The origin itself is left out of the scan.
    Raises ``OriginExclusionError`` if the margin is not positive.
    """
    c = 1.0 / (1000.0 * math.sqrt(level.n))
    u = c * np.arange(-half_width, half_width + 1) / half_width
    X = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1).reshape(-1, 2)
    X = X[np.any(X != 0.0, axis=1)]
    omr = one_minus_r(level, X)
    r = covariance_arrays(level, X)[0]
    margin = float(np.min(np.minimum(omr, 1.0 + r)))
    if not margin > 0:
        raise OriginExclusionError(f"|r_n| reaches 1 near the origin for n={level.n}")
    return margin
