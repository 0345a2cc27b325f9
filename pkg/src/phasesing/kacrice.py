"""Two-point Kac-Rice quantities for the zero set of T + i That.

All conditioning is done with the covariance function r_n and its first and
second derivatives. 1 - r is always formed from ``one_minus_r`` so that the
near-diagonal regime keeps its relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import EnergyLevel
from .wavefield import covariance_arrays, one_minus_r

__all__ = [
    "NearSingularError",
    "NonPSDError",
    "ConditionalCovariance",
    "K2Estimate",
    "RadialPoint",
    "DIRECTIONS",
    "psi_moment",
    "conditional_covariance",
    "gradient_conditional_covariance",
    "two_point_k2",
    "radial_scan",
    "taylor_constant",
    "factorial_moment_integral",
    "factorial_moment_mc",
]

SINGULAR_TOL = 1e-12
PSD_TOL = 1e-10
MIN_DRAWS = 10_000

DIRECTIONS = {
    "e1": (1.0, 0.0),
    "e2": (0.0, 1.0),
    "diag": (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
}


class NearSingularError(ValueError):
    """1 - r_n(x)**2 is too small to condition on (T(x), T(0))."""


class NonPSDError(RuntimeError):
    """A conditional covariance came out with a clearly negative eigenvalue."""


@dataclass(frozen=True)
class ConditionalCovariance:
    omega: np.ndarray
    det: float
    psi: float
    psi_n_moment: float


@dataclass(frozen=True)
class K2Estimate:
    value: float
    stderr: float
    draws: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class RadialPoint:
    x_norm: float
    direction: str
    det_omega: float
    psi: float
    k2: float
    k2_stderr: float


def psi_moment(level: EnergyLevel) -> float:
    """psi_n = sum lambda_1**4 / (n**2 N)."""
    return level.moment(4, 0) / (level.n**2 * level.multiplicity)


def _jets(level: EnergyLevel, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise ValueError(f"expected a single point of shape (2,), got {x.shape}")
    r, r1, r2, r11, r12, r22 = (float(v) for v in covariance_arrays(level, x))
    omr = float(one_minus_r(level, x))
    one_m_r2 = omr * (2.0 - omr)
    if one_m_r2 < SINGULAR_TOL:
        raise NearSingularError(f"1 - r^2 = {one_m_r2:.3e} at x = {tuple(x)} for n = {level.n}")
    return r, np.array([r1, r2]), np.array([[r11, r12], [r12, r22]]), one_m_r2


def conditional_covariance(level: EnergyLevel, x) -> ConditionalCovariance:
    """Covariance of grad T(x) given T(x) = T(0) = 0."""
    _, g, _, one_m_r2 = _jets(level, x)
    E = level.eigenvalue
    omega = 0.5 * E * np.eye(2) - np.outer(g, g) / one_m_r2
    det = float(np.linalg.det(omega))
    return ConditionalCovariance(
        omega=omega, det=det, psi=det / one_m_r2, psi_n_moment=psi_moment(level)
    )


def gradient_conditional_covariance(level: EnergyLevel, x) -> tuple[np.ndarray, float]:
    """Covariance of (grad T(x), grad T(0)) given T(x) = T(0) = 0.

    Returns the 4x4 Schur complement and 1 - r(x)**2. The same matrix serves
    That, which is an independent copy.
    """
    r, g, H, one_m_r2 = _jets(level, x)
    E = level.eigenvalue
    # order: T(x), T(0) | d1T(x), d2T(x), d1T(0), d2T(0)
    c_gf = np.zeros((4, 2))
    c_gf[0:2, 1] = g  # E[d_i T(x) T(0)] = r_i(x)
    c_gf[2:4, 0] = -g  # E[T(x) d_j T(0)] = -r_j(x)
    c_gg = np.zeros((4, 4))
    c_gg[0:2, 0:2] = 0.5 * E * np.eye(2)
    c_gg[2:4, 2:4] = 0.5 * E * np.eye(2)
    c_gg[0:2, 2:4] = -H
    c_gg[2:4, 0:2] = -H.T
    c_ff_inv = np.array([[1.0, -r], [-r, 1.0]]) / one_m_r2
    schur = c_gg - c_gf @ c_ff_inv @ c_gf.T
    return 0.5 * (schur + schur.T), one_m_r2


def _factor(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    if w[0] < -PSD_TOL:
        raise NonPSDError(f"conditional covariance has eigenvalue {w[0]:.3e}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def two_point_k2(level: EnergyLevel, x, draws: int = 100_000,
                 rng: np.random.Generator | None = None, chunk: int = 200_000) -> K2Estimate:
    """Monte Carlo value of the two-point correlation K_2(x).

    K_2(x) = E[|det J(x)| |det J(0)| | Theta(x) = Theta(0) = 0] * p(x), with
    p = (2 pi)**-2 / (1 - r**2) the density of the four field values at 0.
    """
    if draws < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} draws, got {draws}")
    rng = np.random.default_rng() if rng is None else rng
    cov, one_m_r2 = gradient_conditional_covariance(level, x)
    L = _factor(cov)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        g = rng.standard_normal((k, 4)) @ L.T  # grad T(x), grad T(0)
        gh = rng.standard_normal((k, 4)) @ L.T  # grad That(x), grad That(0)
        jx = g[:, 0] * gh[:, 1] - g[:, 1] * gh[:, 0]
        j0 = g[:, 2] * gh[:, 3] - g[:, 3] * gh[:, 2]
        prod = np.abs(jx * j0)
        total += float(prod.sum())
        total_sq += float(np.dot(prod, prod))
        done += k
    mean = total / draws
    var = max(total_sq / draws - mean**2, 0.0)
    dens = 1.0 / ((2 * math.pi) ** 2 * one_m_r2)
    return K2Estimate(mean * dens, math.sqrt(var / draws) * dens, draws)


def radial_scan(level: EnergyLevel, radii, draws: int = 20_000,
                rng: np.random.Generator | None = None, directions=None) -> list[RadialPoint]:
    """Omega determinant, Psi and K_2 along rays from the origin."""
    rng = np.random.default_rng() if rng is None else rng
    directions = DIRECTIONS if directions is None else directions
    rows = []
    for name, u in directions.items():
        u = np.asarray(u, dtype=np.float64)
        for rho in radii:
            x = float(rho) * u
            cc = conditional_covariance(level, x)
            k2 = two_point_k2(level, x, draws=draws, rng=rng)
            rows.append(RadialPoint(float(rho), name, cc.det, cc.psi, k2.value, k2.stderr))
    return rows


def taylor_constant(level: EnergyLevel, direction=(1.0, 0.0), radius: float | None = None) -> float:
    """det Omega(x) / (E**3 |x|**2) at a small radius along ``direction``."""
    rho = 1e-4 / math.sqrt(level.n) if radius is None else radius
    u = np.asarray(direction, dtype=np.float64)
    u = u / np.linalg.norm(u)
    cc = conditional_covariance(level, rho * u)
    return cc.det / (level.eigenvalue**3 * rho**2)


def factorial_moment_integral(level: EnergyLevel, side: float | None = None, nodes: int = 12,
                              draws: int = 20_000, rng: np.random.Generator | None = None):
    """Integral of K_2(x - y) over Q x Q for a square Q of the given side.

    Uses the evenness of K_2 in each coordinate:
    4 * int_{[0,s]^2} K_2(u) (s - u1)(s - u2) du, by tensor Gauss-Legendre.
    Returns (value, stderr).
    """
    rng = np.random.default_rng() if rng is None else rng
    if side is None:
        side = 1.0 / math.ceil(10 * math.sqrt(level.n))
    t, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * side * (t + 1.0)
    wu = 0.5 * side * w * (side - u)
    value = 0.0
    var = 0.0
    for i in range(nodes):
        for j in range(nodes):
            k2 = two_point_k2(level, np.array([u[i], u[j]]), draws=draws, rng=rng)
            wt = 4.0 * wu[i] * wu[j]
            value += wt * k2.value
            var += (wt * k2.stderr) ** 2
    return value, math.sqrt(var)


def factorial_moment_mc(positions, cells_per_axis: int) -> float:
    """Mean of I_Q (I_Q - 1) over the cells of one grid, for one zero set."""
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    M = int(cells_per_axis)
    idx = np.minimum(np.floor(np.mod(pts, 1.0) * M).astype(np.int64), M - 1)
    counts = np.bincount(idx[:, 0] * M + idx[:, 1], minlength=M * M)
    return float(np.sum(counts * (counts - 1))) / (M * M)
