"""Phase singularities, the epsilon-approximate count and nodal length.

Zeros are located by a winding-number scan over a square grid of cells.
Cells with winding 0 are not trusted blindly: a cell can hide a pair of
zeros of opposite charge, so any cell that a second-order Taylor bound
cannot certify as zero-free is split in four and rescanned. Cells with
winding +-1 seed a damped Newton iteration from their centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .wavefield import WaveSample, ceil_sqrt, evaluate_points

__all__ = [
    "Zero",
    "ZeroSet",
    "ScanDiagnostics",
    "UnresolvedCellError",
    "DegenerateFieldError",
    "default_cells",
    "locate_zeros",
    "epsilon_count",
    "nodal_length",
    "NodalLength",
]

EDGE_POINTS = 8
MAX_BISECTIONS = 48
MAX_WINDING_SPLITS = 4
MAX_EXCLUSION_SPLITS = 6
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
DEDUP_TOL = 1e-8
CHUNK = 16384


class UnresolvedCellError(RuntimeError):
    """A cell could not be resolved into isolated simple zeros."""


class DegenerateFieldError(UnresolvedCellError):
    """The field has a vanishing component, so its zeros are not isolated."""


@dataclass(frozen=True)
class Zero:
    position: tuple[float, float]
    charge: int
    jacobian_det: float


@dataclass
class ScanDiagnostics:
    cells_scanned: int = 0
    newton_failures: int = 0
    dedup_merges: int = 0
    exclusion_splits: int = 0
    winding_splits: int = 0
    edge_refinements: int = 0
    uncertified_leaves: int = 0


@dataclass(frozen=True)
class ZeroSet:
    zeros: tuple[Zero, ...]
    diagnostics: ScanDiagnostics = field(compare=False)

    @property
    def count(self) -> int:
        return len(self.zeros)

    @property
    def total_charge(self) -> int:
        return sum(z.charge for z in self.zeros)

    def positions(self) -> np.ndarray:
        return np.array([z.position for z in self.zeros], dtype=float).reshape(-1, 2)

    def csv_rows(self):
        for z in self.zeros:
            yield (z.position[0], z.position[1], z.charge, z.jacobian_det)


def default_cells(n: int) -> int:
    return ceil_sqrt(10 * 10 * n)


# -- scattered evaluation ---------------------------------------------------


class _Field:
    """Fast evaluation of (T, That) and the Jacobian at scattered points."""

    def __init__(self, sample: WaveSample):
        level = sample.level
        self.lam = level.array.astype(np.float64)
        self.kmax = level.max_frequency
        self.idx1 = level.array[:, 0] + self.kmax
        self.idx2 = level.array[:, 1] + self.kmax
        N = level.multiplicity
        self.theta_coeff = (sample.coeff_a + 1j * sample.coeff_ahat) / math.sqrt(N)
        a = np.abs(sample.coeff_a).sum() / math.sqrt(N)
        ah = np.abs(sample.coeff_ahat).sum() / math.sqrt(N)
        # global bound on |D^3 F[u, u, u]| for unit u, F = (T, That)
        self.third_bound = (2 * math.pi) ** 3 * level.n**1.5 * math.hypot(a, ah)
        self.coeff_a = sample.coeff_a / math.sqrt(N)
        self.coeff_ahat = sample.coeff_ahat / math.sqrt(N)

    def _basis(self, pts: np.ndarray) -> np.ndarray:
        """Characters e(<lambda, x>) as an (N, P) array, from powers of e(x1) and e(x2)."""
        K = self.kmax
        out = []
        for c in (0, 1):
            z = np.exp(2j * np.pi * np.mod(pts[:, c], 1.0))
            pw = np.empty((2 * K + 1, len(pts)), dtype=np.complex128)
            pw[K] = 1.0
            for k in range(1, K + 1):
                np.multiply(pw[K + k - 1], z, out=pw[K + k])
            pw[:K] = np.conj(pw[K + 1:][::-1])
            out.append(pw)
        return out[0][self.idx1] * out[1][self.idx2]

    def theta(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty(len(pts), dtype=np.complex128)
        for s in range(0, len(pts), CHUNK):
            out[s:s + CHUNK] = self.theta_coeff @ self._basis(pts[s:s + CHUNK])
        return out

    def jet(self, pts: np.ndarray, hessian: bool = False):
        """F (P, 2) and J (P, 2, 2) with J[:, i, j] = d_j F_i.

        With ``hessian`` also returns sqrt(|H_T|^2 + |H_That|^2) in spectral
        norm, a bound on |D^2 F[u, v]| for unit u, v.
        """
        P = len(pts)
        F = np.empty((P, 2))
        J = np.empty((P, 2, 2))
        H = np.empty((P, 2, 3)) if hessian else None
        tp = 2j * np.pi
        l1, l2 = self.lam[:, 0], self.lam[:, 1]
        for s in range(0, P, CHUNK):
            e = self._basis(pts[s:s + CHUNK])
            for row, c in enumerate((self.coeff_a, self.coeff_ahat)):
                F[s:s + CHUNK, row] = (c @ e).real
                J[s:s + CHUNK, row, 0] = ((tp * l1 * c) @ e).real
                J[s:s + CHUNK, row, 1] = ((tp * l2 * c) @ e).real
                if hessian:
                    for q, w in enumerate((l1 * l1, l1 * l2, l2 * l2)):
                        H[s:s + CHUNK, row, q] = ((tp * tp * w * c) @ e).real
        if not hessian:
            return F, J
        # spectral norm of a symmetric 2x2 [[p, q], [q, r]]
        p, q, r = H[..., 0], H[..., 1], H[..., 2]
        spec = np.abs(0.5 * (p + r)) + np.hypot(0.5 * (p - r), q)
        return F, J, np.hypot(spec[:, 0], spec[:, 1])

    def remainder(self, rho, hnorm):
        """Bound on |F(c + d) - F(c) - J d| for |d| <= rho."""
        return 0.5 * hnorm * rho**2 + self.third_bound * rho**3 / 6


# -- winding numbers ----------------------------------------------------------


def _edge_phase(fld: _Field, start: np.ndarray, vec: np.ndarray, diag: ScanDiagnostics) -> np.ndarray:
    """Total change of arg(Theta) along each directed segment start -> start+vec.

    Each segment is sampled at EDGE_POINTS steps; any step whose phase
    increment is not below pi/2 is bisected until it is.
    """
    E = len(start)
    k = EDGE_POINTS
    t = np.arange(k + 1) / k
    pts = start[:, None, :] + t[None, :, None] * vec[:, None, :]
    th = fld.theta(pts.reshape(-1, 2)).reshape(E, k + 1)
    return _sum_increments(fld, start, vec, th, diag)


def _sum_increments(fld, start, vec, th, diag):
    """Sum phase increments of samples th[e, 0..k] at t = j/k, bisecting unresolved steps."""
    k = th.shape[1] - 1
    t = np.arange(k + 1) / k
    inc = np.angle(th[:, 1:] * np.conj(th[:, :-1]))
    good = (np.abs(inc) < math.pi / 2) & (th[:, 1:] != 0) & (th[:, :-1] != 0)
    total = np.where(good, inc, 0.0).sum(axis=1)
    # pending sub-segments: owning edge, parameter range and end values
    eid, ci = np.nonzero(~good)
    t0, t1 = t[ci], t[ci + 1]
    z0, z1 = th[eid, ci], th[eid, ci + 1]
    for _ in range(MAX_BISECTIONS):
        if eid.size == 0:
            return total
        diag.edge_refinements += int(eid.size)
        tm = 0.5 * (t0 + t1)
        zm = fld.theta(start[eid] + tm[:, None] * vec[eid])
        eid = np.concatenate([eid, eid])
        ta, tb = np.concatenate([t0, tm]), np.concatenate([tm, t1])
        za, zb = np.concatenate([z0, zm]), np.concatenate([zm, z1])
        inc = np.angle(zb * np.conj(za))
        ok = (np.abs(inc) < math.pi / 2) & (za != 0) & (zb != 0)
        np.add.at(total, eid[ok], inc[ok])
        eid, t0, t1, z0, z1 = eid[~ok], ta[~ok], tb[~ok], za[~ok], zb[~ok]
    if eid.size:
        raise UnresolvedCellError(f"{np.unique(eid).size} cell edges have unresolved phase increments")
    return total


def _square_windings(fld: _Field, origin: np.ndarray, h: np.ndarray, diag: ScanDiagnostics) -> np.ndarray:
    """Winding numbers of Theta around squares [o, o+h]^2 (counter-clockwise)."""
    C = len(origin)
    ex = np.stack([h, np.zeros_like(h)], axis=1)
    ey = np.stack([np.zeros_like(h), h], axis=1)
    starts = np.concatenate([origin, origin + ex, origin + ex + ey, origin + ey])
    vecs = np.concatenate([ex, ey, -ex, -ey])
    phase = _edge_phase(fld, starts, vecs, diag).reshape(4, C).sum(axis=0)
    return np.rint(phase / (2 * math.pi)).astype(int)


def _grid_windings(fld: _Field, M: int, diag: ScanDiagnostics) -> np.ndarray:
    """Windings of the M x M grid cells, sharing each edge between neighbours.

    Theta is sampled along whole grid lines as an outer product, so the
    exponentials are computed once per coordinate.
    """
    h = 1.0 / M
    k = EDGE_POINTS
    fine = np.arange(M * k) / (M * k)
    coarse = np.arange(M) / M

    def chars(x, col):
        return np.exp(2j * np.pi * np.mod(np.outer(fld.lam[:, col], x), 1.0))

    c = fld.theta_coeff[:, None]
    # lines[c][p, q]: Theta with the varying coordinate at fine[p] and the other at coarse[q]
    horiz = (chars(fine, 0) * c).T @ chars(coarse, 1)
    vert = (chars(fine, 1) * c).T @ chars(coarse, 0)
    i, j = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    corners = np.stack([i.ravel() * h, j.ravel() * h], axis=1)
    phases = []
    for line, along in ((horiz, 0), (vert, 1)):
        ext = np.concatenate([line, line[:1]], axis=0)
        idx = np.arange(M)[:, None] * k + np.arange(k + 1)[None, :]
        # samples[a, b, :] for the edge starting at grid index a along the line, line b
        samples = ext[idx]  # (M, k + 1, M)
        if along == 0:
            th = samples.transpose(0, 2, 1).reshape(M * M, k + 1)
        else:
            th = samples.transpose(2, 0, 1).reshape(M * M, k + 1)
        vec = np.tile([h, 0.0] if along == 0 else [0.0, h], (M * M, 1))
        phases.append(_sum_increments(fld, corners, vec, th, diag).reshape(M, M))
    horiz_p, vert_p = phases
    # bottom + right - top - left, periodic in both directions
    phase = horiz_p + np.roll(vert_p, -1, axis=0) - np.roll(horiz_p, -1, axis=1) - vert_p
    return np.rint(phase / (2 * math.pi)).astype(int)


def _certified_free(fld: _Field, origin: np.ndarray, h: np.ndarray) -> np.ndarray:
    """True where (T, That) has no zero on the closed square, by Taylor bounds at the centre.

    With F(c + d) = F + J d + R and |R| <= B (rho the half-diagonal, B from
    the Hessian at c and a global third-derivative bound), the square is
    zero-free if |F| > |J| rho + B, or if the zero d* of the linear model
    sits at distance delta from the square with sigma_min(J) delta > B.
    """
    centre = origin + h[:, None] / 2
    F, J, hn = fld.jet(centre, hessian=True)
    rho = h * math.sqrt(0.5)
    sv = np.linalg.svd(J, compute_uv=False)
    remainder = fld.remainder(rho, hn)
    crude = np.linalg.norm(F, axis=1) > sv[:, 0] * rho + remainder
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.stack([[J[:, 1, 1], -J[:, 0, 1]], [-J[:, 1, 0], J[:, 0, 0]]]).transpose(2, 0, 1)
        dstar = -np.einsum("pij,pj->pi", inv, F) / det[:, None]
    half = (h / 2)[:, None]
    gap = np.linalg.norm(np.maximum(np.abs(dstar) - half, 0.0), axis=1)
    linear = np.isfinite(gap) & (sv[:, 1] * gap > remainder)
    return crude | linear


def _disk_covered(fld: _Field, origin: np.ndarray, h: np.ndarray, roots: np.ndarray,
                  radii: np.ndarray) -> np.ndarray:
    """True where the square lies inside the isolation disk of a known zero."""
    if len(roots) == 0 or len(origin) == 0:
        return np.zeros(len(origin), dtype=bool)
    tree = cKDTree(np.mod(roots, 1.0), boxsize=1.0)
    centre = np.mod(origin + h[:, None] / 2, 1.0)
    _, idx = tree.query(centre)
    d = np.abs(np.mod(centre - roots[idx] + 0.5, 1.0) - 0.5)
    far = np.hypot(d[:, 0] + h / 2, d[:, 1] + h / 2)
    return far < radii[idx]


def _root_covers(roots: np.ndarray, radii: np.ndarray, origin: np.ndarray, h: np.ndarray) -> np.ndarray:
    """True where the square around its own root lies inside the root's isolation disk."""
    d = np.mod(roots - origin + 0.5, 1.0) - 0.5
    far = np.hypot(np.maximum(d[:, 0], h - d[:, 0]), np.maximum(d[:, 1], h - d[:, 1]))
    return far < radii


def _isolation_radius(fld: _Field, J: np.ndarray, hnorm: np.ndarray) -> np.ndarray:
    """Radius r of a disk around a simple zero that holds no other zero.

    Solves sigma_min(J) = |D^2F| r / 2 + K3 r^2 / 6 for r.
    """
    sigma = np.linalg.svd(J, compute_uv=False)[:, 1]
    a = fld.third_bound / 6
    b = 0.5 * hnorm
    r = 2 * sigma / (b + np.sqrt(b * b + 4 * a * sigma))
    return 0.99 * r


def _split(origin: np.ndarray, h: np.ndarray):
    hh = h / 2
    offs = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    o = (origin[:, None, :] + offs[None] * hh[:, None, None]).reshape(-1, 2)
    return o, np.repeat(hh, 4)


# -- Newton -------------------------------------------------------------------


def _newton(fld: _Field, x0: np.ndarray):
    """Damped Newton on (T, That) for a batch of starting points.

    Returns (roots, converged, F, J) evaluated at the final iterates.
    """
    x = x0.copy()
    F, J = fld.jet(x)
    res = np.max(np.abs(F), axis=1)
    done = res <= NEWTON_TOL
    for _ in range(NEWTON_MAX_ITER):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        try:
            step = -np.linalg.solve(J[act], F[act][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.einsum("pij,pj->pi", np.linalg.pinv(J[act]), F[act])
        lam = np.ones(act.size)
        for _ in range(10):
            trial = x[act] + lam[:, None] * step
            Ft, Jt = fld.jet(trial)
            rt = np.max(np.abs(Ft), axis=1)
            worse = rt > res[act]
            if not worse.any():
                break
            lam[worse] *= 0.5
        x[act] = trial
        F[act], J[act], res[act] = Ft, Jt, rt
        small = np.linalg.norm(lam[:, None] * step, axis=1) < 1e-15
        done[act] = (rt <= NEWTON_TOL) | (small & (rt <= 1e-10))
    return x, done & (res <= 1e-10), F, J


# -- main scan ------------------------------------------------------------------


def _inside(x: np.ndarray, origin: np.ndarray, h: np.ndarray) -> np.ndarray:
    d = np.mod(x - origin + 0.5, 1.0) - 0.5
    slack = 1e-9 * h[:, None] + 1e-12
    return np.all((d >= -slack) & (d <= h[:, None] + slack), axis=1)


def _torus_dedup(pts: np.ndarray, tol: float):
    keep = []
    merges = 0
    order = np.lexsort((pts[:, 1], pts[:, 0])) if len(pts) else np.array([], dtype=int)
    kept = np.empty((0, 2))
    for k in order:
        if len(kept):
            d = np.abs(np.mod(kept - pts[k] + 0.5, 1.0) - 0.5)
            if np.any(np.hypot(d[:, 0], d[:, 1]) <= tol):
                merges += 1
                continue
        keep.append(k)
        kept = np.vstack([kept, pts[k]])
    return np.array(keep, dtype=int), merges


def locate_zeros(sample: WaveSample, cells_per_axis: int | None = None) -> ZeroSet:
    """Find all zeros of T + i That on the torus.

    Raises ``UnresolvedCellError`` when a cell cannot be resolved (winding
    of magnitude >= 2 after repeated subdivision, Newton divergence, a root
    with singular Jacobian) and ``DegenerateFieldError`` when one component
    vanishes identically.
    """
    n = sample.level.n
    M = default_cells(n) if cells_per_axis is None else int(cells_per_axis)
    if M < default_cells(n):
        raise ValueError(f"cells_per_axis must be >= {default_cells(n)} for n={n}")
    if not np.any(sample.coeff_a) or not np.any(sample.coeff_ahat):
        raise DegenerateFieldError("a component of the field vanishes identically")

    fld = _Field(sample)
    diag = ScanDiagnostics(cells_scanned=M * M)
    h0 = 1.0 / M
    i, j = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    origin = np.stack([i.ravel() * h0, j.ravel() * h0], axis=1)
    h = np.full(M * M, h0)
    wind = _grid_windings(fld, M, diag).ravel()
    depth = np.zeros(M * M, dtype=int)

    roots = np.empty((0, 2))
    jacs = np.empty((0, 2, 2))
    radii = np.empty(0)
    while len(origin):
        one = np.abs(wind) == 1
        failed = np.zeros(len(origin), dtype=bool)
        crowded = np.zeros(len(origin), dtype=bool)
        if one.any():
            r, Jr, good = _solve_cells(fld, origin[one], h[one], diag)
            failed[np.flatnonzero(one)[~good]] = True
            if np.any(failed & (depth >= MAX_EXCLUSION_SPLITS)):
                raise UnresolvedCellError("Newton iteration did not converge inside its cell")
            _, _, hn = fld.jet(r, hessian=True)
            rad = _isolation_radius(fld, Jr, hn)
            roots = np.concatenate([roots, r])
            jacs = np.concatenate([jacs, Jr])
            radii = np.concatenate([radii, rad])
            # winding one does not rule out extra +-1 pairs; the cell is
            # done only when the isolation disk of its root covers it
            cells = np.flatnonzero(one)[good]
            crowded[cells] = ~_root_covers(r, rad, origin[cells], h[cells])

        multi = np.abs(wind) >= 2
        if np.any(multi & (depth >= MAX_WINDING_SPLITS)):
            raise UnresolvedCellError("winding number >= 2 persists after 4 subdivisions")
        # winding 0: keep only cells that no certificate clears
        suspect = np.flatnonzero(wind == 0)
        if suspect.size:
            free = _certified_free(fld, origin[suspect], h[suspect])
            suspect = suspect[~free]
        if suspect.size:
            free = _disk_covered(fld, origin[suspect], h[suspect], roots, radii)
            suspect = suspect[~free]
        suspect = np.union1d(suspect, np.flatnonzero(crowded))
        leaf = suspect[depth[suspect] >= MAX_EXCLUSION_SPLITS]
        diag.uncertified_leaves += int(leaf.size)
        split = multi | failed
        split[np.setdiff1d(suspect, leaf)] = True
        diag.winding_splits += int(multi.sum())
        diag.exclusion_splits += int(split.sum() - multi.sum())
        if not split.any():
            break
        origin, h = _split(origin[split], h[split])
        depth = np.repeat(depth[split] + 1, 4)
        diag.cells_scanned += len(origin)
        wind = _square_windings(fld, origin, h, diag)

    roots = np.mod(roots, 1.0)
    det = jacs[:, 0, 0] * jacs[:, 1, 1] - jacs[:, 0, 1] * jacs[:, 1, 0]
    if np.any(det == 0):
        raise UnresolvedCellError("singular Jacobian at a zero")
    keep, merges = _torus_dedup(roots, DEDUP_TOL)
    diag.dedup_merges = merges
    keep = keep[np.lexsort((roots[keep, 1], roots[keep, 0]))]
    zeros = tuple(
        Zero(position=(float(roots[k, 0]), float(roots[k, 1])), charge=int(np.sign(det[k])),
             jacobian_det=float(det[k]))
        for k in keep
    )
    return ZeroSet(zeros=zeros, diagnostics=diag)


def _solve_cells(fld: _Field, so: np.ndarray, sh: np.ndarray, diag: ScanDiagnostics):
    """Newton from the centre of each winding-one cell.

    Returns roots, Jacobians and a mask of cells whose iterate converged
    inside the cell; the others are subdivided by the caller.
    """
    roots, ok, F, J = _newton(fld, so + sh[:, None] / 2)
    good = ok & _inside(roots, so, sh)
    diag.newton_failures += int((~good).sum())
    return roots[good], J[good], good


# -- epsilon-approximation --------------------------------------------------------


def epsilon_count(sample: WaveSample, epsilon: float, m: int | None = None, block: int = 8) -> float:
    """Midpoint-rule value of (1/4 eps^2) * int 1{|T|,|That| <= eps} |det J| dx.

    The m x m midpoint grid is visited block by block; blocks on which a
    Taylor bound proves max(|T|, |That|) > eps contribute exactly zero and
    are skipped, so the result equals the plain midpoint sum.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    n = sample.level.n
    m_min = max(20 * ceil_sqrt(n), math.ceil(8 / epsilon))
    m = max(m_min, math.ceil(200 / epsilon)) if m is None else int(m)
    if m < m_min:
        raise ValueError(f"grid size must be >= {m_min}")
    if not np.any(sample.coeff_a) and not np.any(sample.coeff_ahat):
        return 0.0
    fld = _Field(sample)
    nb = -(-m // block)
    bh = block / m
    bi, bj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
    borigin = np.stack([bi.ravel() * bh, bj.ravel() * bh], axis=1)
    # Euclidean norm > sqrt(2) eps guarantees the sup-norm exceeds eps
    F, J, hn = fld.jet(borigin + bh / 2, hessian=True)
    rho = bh * math.sqrt(0.5)
    lower = np.linalg.norm(F, axis=1) - np.linalg.norm(J, ord=2, axis=(1, 2)) * rho \
        - fld.remainder(rho, hn)
    active = np.flatnonzero(lower <= math.sqrt(2) * epsilon)
    total = 0.0
    offs = (np.arange(block) + 0.5) / m
    for s in range(0, len(active), 512):
        idx = active[s:s + 512]
        bo = np.rint(borigin[idx] * m).astype(int)
        pi = bo[:, 0, None] + np.arange(block)[None]
        pj = bo[:, 1, None] + np.arange(block)[None]
        valid = (pi[:, :, None] < m) & (pj[:, None, :] < m)
        x1 = borigin[idx, 0, None] + offs[None]
        x2 = borigin[idx, 1, None] + offs[None]
        pts = np.stack(np.broadcast_arrays(x1[:, :, None], x2[:, None, :]), axis=-1).reshape(-1, 2)
        Fp, Jp = fld.jet(pts)
        det = np.abs(Jp[:, 0, 0] * Jp[:, 1, 1] - Jp[:, 0, 1] * Jp[:, 1, 0])
        hit = np.all(np.abs(Fp) <= epsilon, axis=1) & valid.reshape(-1)
        total += float(np.sum(det[hit]))
    return total / (m * m) / (4 * epsilon**2)


# -- nodal length -----------------------------------------------------------------


@dataclass(frozen=True)
class NodalLength:
    length: float
    ambiguous_cells: int

    def __float__(self):
        return self.length


def _marching_length(f: np.ndarray, centre: np.ndarray, h: float):
    """Length of the zero set of a periodic grid function by marching squares."""
    f00 = f
    f10 = np.roll(f, -1, axis=0)
    f11 = np.roll(np.roll(f, -1, axis=0), -1, axis=1)
    f01 = np.roll(f, -1, axis=1)
    corners = (f00, f10, f11, f01)
    # corner positions in cell units, counter-clockwise
    pos = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
    signs = [c > 0 for c in corners]
    crossings = []
    for e in range(4):
        a, b = corners[e], corners[(e + 1) % 4]
        sa, sb = signs[e], signs[(e + 1) % 4]
        cross = sa != sb
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(cross, a / (a - b), 0.0)
        pa, pb = pos[e], pos[(e + 1) % 4]
        px = pa[0] + t * (pb[0] - pa[0])
        py = pa[1] + t * (pb[1] - pa[1])
        crossings.append((cross, px, py))
    ncross = sum(c[0].astype(int) for c in crossings)

    def seg(p, q):
        return np.hypot(crossings[p][1] - crossings[q][1], crossings[p][2] - crossings[q][2])

    length = np.zeros_like(f)
    two = ncross == 2
    # exactly two crossed edges: one segment joining them
    for p in range(4):
        for q in range(p + 1, 4):
            mask = two & crossings[p][0] & crossings[q][0]
            length = np.where(mask, seg(p, q), length)
    # saddle: all four edges crossed; the centre sign decides the pairing
    four = ncross == 4
    c_pos = centre > 0
    # corner 0 has the same sign as the centre: separate corner 0 and 2
    same0 = c_pos == signs[0]
    pair_a = seg(0, 3) + seg(1, 2)  # cuts off corners 0 and 2
    pair_b = seg(0, 1) + seg(2, 3)  # cuts off corners 1 and 3
    length = np.where(four, np.where(same0, pair_b, pair_a), length)
    return float(length.sum() * h), int(four.sum())


def nodal_length(sample: WaveSample, component: str = "T", m: int | None = None) -> NodalLength:
    """Length of the nodal set of T (or That) by marching squares on an m x m grid."""
    n = sample.level.n
    m_min = 20 * ceil_sqrt(n)
    m = 2 * m_min if m is None else int(m)
    if m < m_min:
        raise ValueError(f"grid size must be >= {m_min}")
    if component not in ("T", "That"):
        raise ValueError("component must be 'T' or 'That'")
    row = 0 if component == "T" else 1
    xs = np.arange(m) / m
    f = evaluate_points(sample, xs, xs, derivatives=False)[row]
    xc = xs + 0.5 / m
    centre = evaluate_points(sample, xc, xc, derivatives=False)[row]
    length, amb = _marching_length(f, centre, 1.0 / m)
    return NodalLength(length=length, ambiguous_cells=amb)
