"""Hermite machinery and Wiener-chaos projections of the zero count.

The zero count is expanded on the six independent standard Gaussians

    T, That, d~1 T, d~2 T, d~1 That, d~2 That      (d~j = sqrt(2/E) d_j)

at each point. The q-th projection integrates products of Hermite
polynomials in these six fields, weighted by the beta coefficients (from
the delta function) and alpha coefficients (from |det J|). Every integral
of a product of at most four field factors is computed exactly on a
uniform grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import astuple, dataclass, fields
from fractions import Fraction

import numpy as np
from scipy.special import erf

from .lattice import EnergyLevel
from .wavefield import WaveSample, evaluate_grid, exact_grid_size

__all__ = [
    "hermite",
    "HermiteTable",
    "beta",
    "beta_eps",
    "alpha_coefficient",
    "alpha_monte_carlo",
    "AlphaValue",
    "ALPHA_TABLE",
    "ChaosStatistics",
    "STATISTIC_NAMES",
    "quadratic_statistics",
    "quadratic_statistics_batch",
    "covariance_matrix",
    "projection0",
    "projection2",
    "projection4_exact",
    "projection4_approx",
    "projection4_approx_batch",
    "projection4_leading_batch",
    "variance_constant",
    "leading_variance_constant",
    "EXTRA_QUARTIC_CASES",
    "chaos_projection",
    "chaos_weights",
    "PROJECTION4_WEIGHTS",
    "LimitLaw",
    "sample_limit",
    "limit_variance",
    "leonov_shiryaev_moment",
    "hermite_moment",
    "quartic_identity",
    "QUARTIC_CASES",
]

MAX_HERMITE_DEGREE = 16
MAX_LS_DEGREE = 6
SQRT_2PI = math.sqrt(2 * math.pi)


# -- Hermite polynomials ---------------------------------------------------------


def hermite(k: int, t):
    """Probabilists' Hermite polynomial H_k(t) by the three-term recursion."""
    if not 0 <= k <= MAX_HERMITE_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_HERMITE_DEGREE}], got {k}")
    t = np.asarray(t, dtype=float)
    prev, cur = np.ones_like(t), t.copy()
    if k == 0:
        return prev if prev.ndim else float(prev)
    for j in range(2, k + 1):
        prev, cur = cur, t * cur - (j - 1) * prev
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class HermiteTable:
    """All H_0..H_max_degree at once; ``table(t)[k]`` is H_k(t)."""

    max_degree: int = 4

    def __post_init__(self):
        if not 0 <= self.max_degree <= MAX_HERMITE_DEGREE:
            raise ValueError("max_degree out of range")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.empty((self.max_degree + 1,) + t.shape)
        out[0] = 1.0
        if self.max_degree >= 1:
            out[1] = t
        for j in range(2, self.max_degree + 1):
            out[j] = t * out[j - 1] - (j - 1) * out[j - 2]
        return out


# -- projection coefficients ------------------------------------------------------


def beta(l: int) -> float:
    """Chaos coefficient of the delta function at 0: H_l(0)/sqrt(2 pi)."""
    if l % 2:
        return 0.0
    return hermite(l, 0.0) / SQRT_2PI


def beta_eps(l: int, eps: float) -> float:
    """Chaos coefficient of the indicator 1{|t| <= eps}/(2 eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if l % 2:
        return 0.0
    if l == 0:
        return erf(eps / math.sqrt(2)) / (2 * eps)
    phi = math.exp(-eps * eps / 2) / SQRT_2PI
    return -phi * hermite(l - 1, eps) / eps


def _alpha_table() -> dict[tuple[int, int, int, int], Fraction]:
    table: dict[tuple[int, int, int, int], Fraction] = {(0, 0, 0, 0): Fraction(1)}
    for pos in range(4):
        idx = [0, 0, 0, 0]
        idx[pos] = 2
        table[tuple(idx)] = Fraction(1, 2)
        idx[pos] = 4
        table[tuple(idx)] = Fraction(-3, 8)
    # pairs of squares: same field or same direction give -1/8, the
    # "crossed" pairs entering XW and YV give 5/8
    for pair, value in {
        (0, 1): Fraction(-1, 8), (2, 3): Fraction(-1, 8),
        (0, 2): Fraction(-1, 8), (1, 3): Fraction(-1, 8),
        (0, 3): Fraction(5, 8), (1, 2): Fraction(5, 8),
    }.items():
        idx = [0, 0, 0, 0]
        idx[pair[0]] = idx[pair[1]] = 2
        table[tuple(idx)] = value
    table[(1, 1, 1, 1)] = Fraction(-3, 8)
    return table


# alpha_{a,b,c,d} = E[|XW - YV| H_a(X) H_b(Y) H_c(V) H_d(W)] for total degree <= 4;
# X, Y, V, W stand for d~1 T, d~2 T, d~1 That, d~2 That
ALPHA_TABLE = _alpha_table()


@dataclass(frozen=True)
class AlphaValue:
    value: float
    stderr: float = 0.0
    exact: bool = True


def alpha_monte_carlo(indices, draws: int, rng: np.random.Generator, chunk: int = 1_000_000):
    """Monte Carlo estimates of alpha for several index tuples on common draws.

    Returns arrays (mean, stderr) aligned with ``indices``.
    """
    indices = [tuple(int(v) for v in ix) for ix in indices]
    top = max(max(ix) for ix in indices)
    table = HermiteTable(top)
    s1 = np.zeros(len(indices))
    s2 = np.zeros(len(indices))
    done = 0
    while done < draws:
        size = min(chunk, draws - done)
        g = rng.standard_normal((4, size))
        weight = np.abs(g[0] * g[3] - g[1] * g[2])
        H = [table(g[c]) for c in range(4)]
        for k, (a, b, c, d) in enumerate(indices):
            v = weight * H[0][a] * H[1][b] * H[2][c] * H[3][d]
            s1[k] += v.sum()
            s2[k] += np.dot(v, v)
        done += size
    mean = s1 / draws
    var = (s2 / draws - mean**2) * draws / (draws - 1)
    return mean, np.sqrt(np.maximum(var, 0.0) / draws)


def alpha_coefficient(a: int, b: int, c: int, d: int, draws: int = 10**7,
                      rng: np.random.Generator | None = None) -> AlphaValue:
    """alpha_{a,b,c,d}: exact for mixed parity or total degree <= 4, else Monte Carlo."""
    idx = (a, b, c, d)
    if min(idx) < 0:
        raise ValueError("indices must be non-negative")
    if len({v % 2 for v in idx}) > 1:
        return AlphaValue(0.0)
    if sum(idx) <= 4:
        return AlphaValue(float(ALPHA_TABLE.get(idx, 0)))
    if rng is None:
        rng = np.random.default_rng(0)
    mean, se = alpha_monte_carlo([idx], draws, rng)
    return AlphaValue(float(mean[0]), float(se[0]), exact=False)


# -- quadratic statistics ---------------------------------------------------------

STATISTIC_NAMES = (
    "W", "W1", "W2", "W12",
    "What", "What1", "What2", "What12",
    "M", "M1", "M2", "M11", "M22", "M12",
)


@dataclass(frozen=True)
class ChaosStatistics:
    """The fourteen quadratic statistics, in the block order of ``covariance_matrix``."""

    W: float
    W1: float
    W2: float
    W12: float
    What: float
    What1: float
    What2: float
    What12: float
    M: float
    M1: float
    M2: float
    M11: float
    M22: float
    M12: float

    def as_vector(self) -> np.ndarray:
        return np.array(astuple(self))

    @classmethod
    def from_vector(cls, v) -> "ChaosStatistics":
        return cls(*(float(x) for x in v))

    @classmethod
    def zeros(cls) -> "ChaosStatistics":
        return cls(*([0.0] * len(fields(cls))))


def quadratic_statistics_batch(level: EnergyLevel, a: np.ndarray, ahat: np.ndarray) -> np.ndarray:
    """Statistics for coefficient arrays of shape (R, N); returns (R, 14)."""
    a = np.atleast_2d(a)
    ahat = np.atleast_2d(ahat)
    n, N = level.n, level.multiplicity
    lam = level.array.astype(float)
    l1, l2 = lam[:, 0], lam[:, 1]
    sN = math.sqrt(N)
    out = np.empty((a.shape[0], 14))
    for off, c in ((0, a), (4, ahat)):
        p = np.abs(c) ** 2
        out[:, off] = (p - 1).sum(axis=1) / sN
        out[:, off + 1] = (p - 1) @ (l1 * l1) / (n * sN)
        out[:, off + 2] = (p - 1) @ (l2 * l2) / (n * sN)
        out[:, off + 3] = p @ (l1 * l2) / (n * sN)
    z = a * np.conj(ahat)
    cols = [
        z.sum(axis=1) / sN,
        1j * (z @ l1) / math.sqrt(n * N),
        1j * (z @ l2) / math.sqrt(n * N),
        z @ (l1 * l1) / (n * sN),
        z @ (l2 * l2) / (n * sN),
        z @ (l1 * l2) / (n * sN),
    ]
    for k, col in enumerate(cols):
        resid = float(np.max(np.abs(col.imag))) if col.size else 0.0
        assert resid < 1e-10, f"imaginary residue {resid:.3e} in {STATISTIC_NAMES[8 + k]}"
        out[:, 8 + k] = col.real
    return out


def quadratic_statistics(sample: WaveSample) -> ChaosStatistics:
    v = quadratic_statistics_batch(sample.level, sample.coeff_a, sample.coeff_ahat)[0]
    return ChaosStatistics.from_vector(v)


def covariance_matrix(eta: float) -> np.ndarray:
    """Limiting covariance of the 14 statistics: block-diagonal (A, A, B)."""
    if not -1 <= eta <= 1:
        raise ValueError("eta must lie in [-1, 1]")
    p, q = (3 + eta), (1 - eta)
    A = np.array([
        [2, 1, 1, 0],
        [1, p / 4, q / 4, 0],
        [1, q / 4, p / 4, 0],
        [0, 0, 0, q / 4],
    ])
    B = np.array([
        [1, 0, 0, 0.5, 0.5, 0],
        [0, 0.5, 0, 0, 0, 0],
        [0, 0, 0.5, 0, 0, 0],
        [0.5, 0, 0, p / 8, q / 8, 0],
        [0.5, 0, 0, q / 8, p / 8, 0],
        [0, 0, 0, 0, 0, q / 8],
    ])
    out = np.zeros((14, 14))
    out[:4, :4] = A
    out[4:8, 4:8] = A
    out[8:, 8:] = B
    return out


# -- chaos projections --------------------------------------------------------------

# field order of the index tuples below
FIELDS = ("T", "That", "d1T", "d2T", "d1That", "d2That")


def chaos_weights(order: int) -> dict[tuple[int, ...], Fraction]:
    """Weights of the order-q projection in units of n*pi.

    Keys are Hermite degrees (i1, j1, i2, i3, j2, j3) on the six fields;
    the weight is (E/2) beta_i1 beta_j1 alpha_{i2 i3 j2 j3} / prod(k!)
    divided by n*pi. Only degrees whose alpha is tabulated are supported.
    """
    if order % 2 or order < 0 or order > 4:
        raise ValueError("order must be 0, 2 or 4")
    # beta_i beta_j (E/2) / (n pi) = pi * H_i(0) H_j(0) / (2 pi) * 2 pi / pi = H_i(0) H_j(0)
    h0 = {k: Fraction(int(round(hermite(k, 0.0)))) for k in range(0, order + 1, 2)}
    out: dict[tuple[int, ...], Fraction] = {}
    for idx in itertools.product(range(order + 1), repeat=6):
        if sum(idx) != order:
            continue
        i1, j1, *rest = idx
        if i1 % 2 or j1 % 2:
            continue
        al = ALPHA_TABLE.get(tuple(rest), Fraction(0))
        if al == 0:
            continue
        denom = math.prod(math.factorial(k) for k in idx)
        out[idx] = h0[i1] * h0[j1] * al / denom
    return out


# explicit weights of the fourth projection, in units of n*pi/64
PROJECTION4_WEIGHTS: dict[tuple[int, ...], int] = {
    # T block
    (4, 0, 0, 0, 0, 0): 8,
    (2, 0, 2, 0, 0, 0): -8,
    (2, 0, 0, 2, 0, 0): -8,
    (0, 0, 2, 2, 0, 0): -2,
    (0, 0, 4, 0, 0, 0): -1,
    (0, 0, 0, 4, 0, 0): -1,
    # That block
    (0, 4, 0, 0, 0, 0): 8,
    (0, 2, 0, 0, 2, 0): -8,
    (0, 2, 0, 0, 0, 2): -8,
    (0, 0, 0, 0, 2, 2): -2,
    (0, 0, 0, 0, 4, 0): -1,
    (0, 0, 0, 0, 0, 4): -1,
    # mixed terms
    (2, 2, 0, 0, 0, 0): 16,
    (2, 0, 0, 0, 2, 0): -8,
    (2, 0, 0, 0, 0, 2): -8,
    (0, 2, 2, 0, 0, 0): -8,
    (0, 2, 0, 2, 0, 0): -8,
    (0, 0, 2, 0, 2, 0): -2,
    (0, 0, 0, 2, 0, 2): -2,
    (0, 0, 2, 0, 0, 2): 10,
    (0, 0, 0, 2, 2, 0): 10,
    (0, 0, 1, 1, 1, 1): -24,
}


def _normalized_fields(sample: WaveSample, m: int) -> list[np.ndarray]:
    g = evaluate_grid(sample, m)
    return [g.t, g.that, *g.normalized()]


def _integrate(hermites, idx) -> float:
    prod = None
    for field_h, k in zip(hermites, idx):
        if k == 0:
            continue
        prod = field_h[k] if prod is None else prod * field_h[k]
    return 1.0 if prod is None else float(prod.mean())


def _hermite_fields(sample: WaveSample, m: int, degree: int):
    table = HermiteTable(degree)
    return [table(f) for f in _normalized_fields(sample, m)]


def projection0(level: EnergyLevel) -> float:
    """Mean of the zero count: n*pi."""
    return math.pi * level.n


def projection2(sample: WaveSample, m: int | None = None) -> float:
    """Second chaos projection by exact quadrature (vanishes for eigenfunctions)."""
    level = sample.level
    m = exact_grid_size(level, 2) if m is None else int(m)
    t, th, x, y, v, w = _normalized_fields(sample, m)
    grad = np.mean(x * x + y * y + v * v + w * w - 4)
    vals = np.mean(t * t + th * th - 2)
    return math.pi * level.n / 2 * (grad - 2 * vals)


def projection4_exact(sample: WaveSample, m: int | None = None) -> float:
    """Fourth chaos projection: n*pi/64 times the weighted quartic integrals."""
    level = sample.level
    m = exact_grid_size(level, 4) if m is None else int(m)
    H = _hermite_fields(sample, m, 4)
    total = sum(w * _integrate(H, idx) for idx, w in PROJECTION4_WEIGHTS.items())
    return level.n * math.pi / 64 * total


def chaos_projection(sample: WaveSample, order: int, m: int | None = None) -> float:
    """Generic projection assembled term by term from the beta/alpha tables."""
    level = sample.level
    weights = chaos_weights(order)
    if order == 0:
        return projection0(level)
    m = exact_grid_size(level, order) if m is None else int(m)
    H = _hermite_fields(sample, m, order)
    return level.n * math.pi * sum(float(w) * _integrate(H, idx) for idx, w in weights.items())


def _approx_bracket(s: np.ndarray) -> np.ndarray:
    W, W1, W2, W12, Wh, Wh1, Wh2, Wh12, M, M1, M2, M11, M22, M12 = s.T
    return (
        0.5 * W**2 + 0.5 * Wh**2 - 3 * W * Wh
        - W1**2 - W2**2 - Wh1**2 - Wh2**2
        + 6 * W1 * Wh2 + 6 * Wh1 * W2
        - 2 * W12**2 - 2 * Wh12**2 - 12 * W12 * Wh12
        - 4 * M1**2 - 4 * M2**2 + 4 * M**2
        - 2 * M11**2 - 2 * M22**2 - 12 * M11 * M22 + 8 * M12**2
        + 4
    )


def projection4_approx_batch(stats: np.ndarray, level: EnergyLevel) -> np.ndarray:
    return level.n * math.pi / (8 * level.multiplicity) * _approx_bracket(np.atleast_2d(stats))


def projection4_approx(stats: ChaosStatistics, level: EnergyLevel) -> float:
    """Leading-order expression of the fourth projection in the quadratic statistics."""
    return float(projection4_approx_batch(stats.as_vector(), level)[0])


def projection4_leading_batch(stats: np.ndarray, level: EnergyLevel) -> np.ndarray:
    """Leading term of the fourth projection with the M_j**2 weight re-derived.

    Expanding int H2(T) H2(d~j That) exactly (case ``vi`` below) gives the
    asymptotic weight 2 on M_j**2, so the bracket carries -8 M_j**2 and the
    centering constant becomes 8. Everything else matches
    ``projection4_approx_batch``.
    """
    s = np.atleast_2d(stats)
    M1, M2 = s[:, 9], s[:, 10]
    extra = -4 * M1**2 - 4 * M2**2 + 4
    return level.n * math.pi / (8 * level.multiplicity) * (_approx_bracket(s) + extra)


# -- exact quartic identities ------------------------------------------------------------

QUARTIC_CASES = ("i", "iv", "v", "viii")
EXTRA_QUARTIC_CASES = ("vi",)


def quartic_identity(sample: WaveSample, case: str) -> tuple[float, float]:
    """(quadrature value, coefficient-side value) of a quartic integral.

    i:    int H4(T)
    iv:   int H2(d~1 T) H2(d~2 T)
    v:    int H2(T) H2(That)
    viii: int d~1T d~2T d~1That d~2That
    vi:   int H2(T) H2(d~1 That)
    """
    level = sample.level
    n, N = level.n, level.multiplicity
    lam = level.array.astype(float)
    l1, l2 = lam[:, 0], lam[:, 1]
    a, ah = sample.coeff_a, sample.coeff_ahat
    s = quadratic_statistics(sample)
    pa, pah = np.abs(a) ** 2, np.abs(ah) ** 2
    H = _hermite_fields(sample, exact_grid_size(level, 4), 4)
    if case == "i":
        quad = _integrate(H, (4, 0, 0, 0, 0, 0))
        coef = 3 / N * s.W**2 - 3 / N**2 * np.sum(pa**2)
    elif case == "iv":
        quad = _integrate(H, (0, 0, 2, 2, 0, 0))
        w4 = np.sum(l1**2 * l2**2 * pa**2) / (n**2 * N)
        coef = 4 / N * (s.W1 * s.W2 + 2 * s.W12**2 - 3 * w4)
    elif case == "v":
        quad = _integrate(H, (2, 2, 0, 0, 0, 0))
        cross = np.sum(a**2 * np.conj(ah) ** 2).real
        coef = (s.W * s.What + 2 * s.M**2 - cross / N - 2 / N * np.sum(pa * pah)) / N
    elif case == "viii":
        quad = _integrate(H, (0, 0, 1, 1, 1, 1))
        w = l1**2 * l2**2 / (n**2 * N)
        mixed = np.sum(w * pa * pah)
        cross = np.sum(w * (a**2 * np.conj(ah) ** 2)).real
        coef = 4 / N * (s.W12 * s.What12 + s.M11 * s.M22 + s.M12**2 - 2 * mixed - cross)
    elif case == "vi":
        quad = _integrate(H, (2, 0, 0, 0, 2, 0))
        mixed = np.sum(l1**2 * pa * pah)
        cross = np.sum(l1**2 * (a**2 * np.conj(ah) ** 2)).real
        coef = ((2 * s.W * s.What1 + 4 * s.M1**2) / N
                - 4 / (n * N**2) * mixed + 2 / (n * N**2) * cross)
    else:
        raise ValueError(f"unknown case {case!r}; expected one of {QUARTIC_CASES + EXTRA_QUARTIC_CASES}")
    return float(quad), float(coef)


# -- limit laws ----------------------------------------------------------------------


@dataclass(frozen=True)
class LimitLaw:
    eta: float
    kind: str = "J"

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if self.kind not in ("J", "M"):
            raise ValueError("kind must be 'J' or 'M'")


def limit_variance(eta: float) -> float:
    """Variance of the unnormalized J combination, 8(3 eta^2 + 5)."""
    return 8 * (3 * eta**2 + 5)


def variance_constant(eta: float) -> float:
    """d(eta) = (3 eta^2 + 5) / (128 pi^2)."""
    return (3 * eta**2 + 5) / (128 * math.pi**2)


def leading_variance_constant(eta: float) -> float:
    """Variance constant implied by ``projection4_leading_batch``: (3 eta^2 + 11) / (128 pi^2)."""
    return (3 * eta**2 + 11) / (128 * math.pi**2)


def sample_limit(law: LimitLaw, rng: np.random.Generator, size: int | None = None,
                 normalized: bool = True):
    """Draws of J_eta (or M_eta); ``normalized=False`` skips the J scaling."""
    eta = law.eta
    shape = () if size is None else (size,)
    if law.kind == "J":
        X = rng.standard_normal((8,) + shape)
        A = 2 * X[0] ** 2 + 2 * X[1] ** 2 - 4 * X[2] ** 2
        B = 2 * X[3] ** 2 + 2 * X[4] ** 2 - 4 * X[5] ** 2
        C = X[6] ** 2 + X[7] ** 2
        val = (1 + eta) / 2 * A + (1 - eta) / 2 * B - 2 * (C - 2)
        if normalized:
            val = val / (2 * math.sqrt(10 + 6 * eta**2))
    else:
        X = rng.standard_normal((2,) + shape)
        val = (2 - (1 + eta) * X[0] ** 2 - (1 - eta) * X[1] ** 2) / (2 * math.sqrt(1 + eta**2))
    return val if size is not None else float(val)


# -- moments of Hermite products ---------------------------------------------------------


def hermite_moment(degrees_x, degrees_y, cov):
    """E[prod_i H_{p_i}(X_i) prod_j H_{a_j}(Y_j)] for independent X's and independent Y's.

    ``cov[i][j]`` is E[X_i Y_j], optionally with trailing axes (e.g. one
    covariance matrix per point). The value is the sum over permutations
    of products of covariances between the repeated copies.
    """
    p = [int(v) for v in degrees_x]
    q = [int(v) for v in degrees_y]
    if sum(p) > MAX_LS_DEGREE or sum(q) > MAX_LS_DEGREE:
        raise ValueError(f"block degree exceeds cap {MAX_LS_DEGREE}")
    cov = np.asarray(cov, dtype=float)
    if sum(p) != sum(q):
        return np.zeros(cov.shape[2:]) if cov.ndim > 2 else 0.0
    left = [i for i, k in enumerate(p) for _ in range(k)]
    right = [j for j, k in enumerate(q) for _ in range(k)]
    total = np.zeros(cov.shape[2:])
    for perm in itertools.permutations(range(len(right))):
        prod = np.ones(cov.shape[2:])
        for i, s in zip(left, perm):
            prod = prod * cov[i, right[s]]
        total = total + prod
    return total if total.ndim else float(total)


def leonov_shiryaev_moment(block_degrees, pair_covariances) -> float:
    """Joint moment of Hermite products at two points for the six-field family.

    ``block_degrees`` is (p, a, q, b): degrees on (T, d~1 T, d~2 T) at x, at
    y, then on (That, d~1 That, d~2 That) at x, at y. ``pair_covariances`` is
    (CX, CY) with CX[i][j] = E[X_i(x) X_j(y)] and likewise CY. The T and That
    families are independent, so the moment factorizes.
    """
    p, a, q, b = block_degrees
    cx, cy = pair_covariances
    if sum(p) != sum(a) or sum(q) != sum(b):
        return 0.0
    return hermite_moment(p, a, cx) * hermite_moment(q, b, cy)
