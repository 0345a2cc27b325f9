"""Seeded Monte Carlo experiments over many replications of the wave.

Replication r at level n draws from a PCG64 stream seeded by

    seed = mix(mix(mix(mix(master_seed) ^ n) ^ r) ^ tag)

where ``mix`` is the splitmix64 finalizer and ``tag`` is a small integer
naming the stream (see ``STREAM_TAGS``). Each replication is independent of
scheduling, so reports do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import ks_2samp

from . import __version__
from .chaos import (
    QUARTIC_CASES,
    LimitLaw,
    projection2,
    projection4_exact,
    quartic_identity,
    sample_limit,
    variance_constant,
)
from .kacrice import factorial_moment_integral, factorial_moment_mc
from .lattice import EnergyLevel, enumerate_level, mu_hat
from .wavefield import sample_wave
from .zerofinder import UnresolvedCellError, default_cells, locate_zeros, nodal_length

__all__ = [
    "SCHEMA_VERSION",
    "CHECKS",
    "STREAM_TAGS",
    "Bands",
    "ExperimentConfig",
    "LevelRecord",
    "ExperimentReport",
    "ExperimentFailed",
    "SchemaVersionError",
    "splitmix64",
    "stream_seed",
    "stream",
    "run_replication",
    "run_experiment",
    "distribution_distance",
    "persist",
    "load",
    "report_to_csv",
    "records_from_csv",
]

SCHEMA_VERSION = 1
CHECKS = ("mean", "variance", "distribution", "chaos-identities", "kacrice", "nodal-length")
STREAM_TAGS = {"wave": 1, "limit": 2, "kacrice": 3}
MASK64 = (1 << 64) - 1
MAX_INVALID_FRACTION = 0.01


class ExperimentFailed(RuntimeError):
    """Too many invalid replications; the partial report is attached."""

    def __init__(self, message: str, report: "ExperimentReport"):
        super().__init__(message)
        self.report = report


class SchemaVersionError(ValueError):
    pass


# -- seeding ----------------------------------------------------------------------


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, n: int, rep: int, tag: str) -> int:
    s = splitmix64(master_seed & MASK64)
    for part in (n, rep, STREAM_TAGS[tag]):
        s = splitmix64(s ^ (part & MASK64))
    return s


def stream(master_seed: int, n: int, rep: int, tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(master_seed, n, rep, tag)))


# -- configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class Bands:
    """Pass criteria. The variance and KS bands refer to asymptotic claims."""

    mean_sigmas: float = 4.0
    variance_low: float = 0.5
    variance_high: float = 2.0
    ks_max: float = 0.15
    identity_tol: float = 1e-9
    projection2_tol: float = 1e-8
    kacrice_rel: float = 0.15
    nodal_rel: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    n: tuple[int, ...]
    replications: int
    master_seed: int = 0
    cells_per_axis: int | None = None
    checks: frozenset[str] = frozenset({"mean"})
    output_path: str | None = None
    workers: int = 1
    limit_draws: int = 100_000
    kacrice_nodes: int = 12
    kacrice_draws: int = 20_000
    bands: Bands = field(default_factory=Bands)

    def __post_init__(self):
        ns = (self.n,) if isinstance(self.n, int) else tuple(int(v) for v in self.n)
        object.__setattr__(self, "n", ns)
        object.__setattr__(self, "checks", frozenset(self.checks))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not ns:
            raise ValueError("at least one n is required")
        for n in ns:
            if n < 1 or enumerate_level(n) is None:
                raise ValueError(f"{n} is not a sum of two squares")
        unknown = self.checks - set(CHECKS)
        if unknown:
            raise ValueError(f"unknown checks {sorted(unknown)}; choose from {CHECKS}")
        if "distribution" in self.checks and self.replications < 100:
            raise ValueError("the distribution check needs at least 100 replications")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = list(self.n)
        d["checks"] = sorted(self.checks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["bands"] = Bands(**d.get("bands", {}))
        return cls(**d)


# -- per-replication work -----------------------------------------------------------


@dataclass
class Replication:
    index: int
    valid: bool
    count: int = 0
    charge: int = 0
    retried: bool = False
    p4: float | None = None
    identity_err: float | None = None
    projection2: float | None = None
    nodal: float | None = None
    pair_moment: float | None = None


def run_replication(level: EnergyLevel, config: ExperimentConfig, rep: int) -> Replication:
    rng = stream(config.master_seed, level.n, rep, "wave")
    sample = sample_wave(level, rng)
    cells = config.cells_per_axis or default_cells(level.n)
    out = Replication(index=rep, valid=True)
    try:
        zs = locate_zeros(sample, cells)
    except UnresolvedCellError:
        out.retried = True
        try:
            zs = locate_zeros(sample, 2 * cells)
        except UnresolvedCellError:
            out.valid = False
            return out
    out.count = zs.count
    out.charge = zs.total_charge
    checks = config.checks
    if checks & {"variance", "distribution"}:
        out.p4 = projection4_exact(sample)
    if "chaos-identities" in checks:
        errs = [abs(q - c) for q, c in (quartic_identity(sample, k) for k in QUARTIC_CASES)]
        out.identity_err = max(errs)
        out.projection2 = abs(projection2(sample))
    if "nodal-length" in checks:
        out.nodal = nodal_length(sample, "T").length
    if "kacrice" in checks:
        out.pair_moment = factorial_moment_mc(zs.positions(), default_cells(level.n))
    return out


# -- report -------------------------------------------------------------------------


@dataclass
class LevelRecord:
    n: int
    N: int
    mu4: float
    replications: int
    invalid_count: int
    mean_I: float
    stderr_mean: float
    var_I: float
    var_I4_exact: float | None
    predicted_mean: float
    predicted_var: float
    ks_distance_J: float | None
    checks: dict[str, bool] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass
class ExperimentReport:
    records: list[LevelRecord]
    metadata: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": self.metadata,
            "records": [asdict(r) for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"report schema version {version!r} is not supported (expected {SCHEMA_VERSION})"
            )
        return cls(records=[LevelRecord(**r) for r in d["records"]], metadata=d["metadata"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def distribution_distance(samples, law: LimitLaw, draws: int = 100_000,
                          rng: np.random.Generator | None = None) -> float:
    """KS distance between standardized samples and draws of the limit law."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 100:
        raise ValueError(f"need at least 100 samples, got {x.size}")
    rng = np.random.default_rng() if rng is None else rng
    z = (x - x.mean()) / x.std(ddof=1)
    ref = sample_limit(law, rng, size=draws)
    return float(ks_2samp(z, ref).statistic)


def _variance(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1)) if x.size > 1 else 0.0


def _summarize(level: EnergyLevel, config: ExperimentConfig, reps: list[Replication]) -> LevelRecord:
    n, N = level.n, level.multiplicity
    E = level.eigenvalue
    b = config.bands
    eta = mu_hat(level, 4)
    good = [r for r in reps if r.valid]
    counts = np.array([r.count for r in good], dtype=np.float64)
    mean_I = float(counts.mean()) if counts.size else math.nan
    var_I = _variance(counts)
    stderr = math.sqrt(var_I / counts.size) if counts.size else math.nan
    pred_var = variance_constant(eta) * E**2 / N**2
    rec = LevelRecord(
        n=n, N=N, mu4=eta, replications=len(reps), invalid_count=len(reps) - len(good),
        mean_I=mean_I, stderr_mean=stderr, var_I=var_I, var_I4_exact=None,
        predicted_mean=math.pi * n, predicted_var=pred_var, ks_distance_J=None,
    )
    rec.extras["charge_violations"] = float(sum(r.charge != 0 for r in good))
    rec.extras["retried"] = float(sum(r.retried for r in reps))
    checks = config.checks
    if "mean" in checks:
        rec.checks["mean"] = bool(abs(mean_I - math.pi * n) <= b.mean_sigmas * stderr)
    p4 = np.array([r.p4 for r in good if r.p4 is not None])
    if p4.size:
        rec.var_I4_exact = _variance(p4)
        resid = counts - math.pi * n - p4
        rec.extras["var_residual"] = _variance(resid)
    if "variance" in checks:
        ratio = var_I / pred_var
        rec.extras["variance_ratio"] = ratio
        rec.checks["variance"] = bool(b.variance_low <= ratio <= b.variance_high)
    if "distribution" in checks:
        rng = stream(config.master_seed, n, 0, "limit")
        rec.ks_distance_J = distribution_distance(p4, LimitLaw(min(abs(eta), 1.0)),
                                                  config.limit_draws, rng)
        rec.checks["distribution"] = bool(rec.ks_distance_J <= b.ks_max)
    if "chaos-identities" in checks:
        ident = max(r.identity_err for r in good)
        p2 = max(r.projection2 for r in good)
        rec.extras["identity_max_abs_err"] = ident
        rec.extras["projection2_max_abs"] = p2
        rec.checks["chaos-identities"] = bool(ident <= b.identity_tol and p2 <= b.projection2_tol)
    if "nodal-length" in checks:
        L = np.array([r.nodal for r in good])
        pred = E / (2 * math.sqrt(2))
        rec.extras["mean_nodal_length"] = float(L.mean())
        rec.extras["stderr_nodal_length"] = math.sqrt(_variance(L) / L.size)
        rec.extras["predicted_nodal_length"] = pred
        rec.extras["sqrt_energy_nodal_length"] = math.sqrt(E) / (2 * math.sqrt(2))
        rec.checks["nodal-length"] = bool(abs(L.mean() - pred) <= b.nodal_rel * pred)
    if "kacrice" in checks:
        pm = np.array([r.pair_moment for r in good])
        rng = stream(config.master_seed, n, 0, "kacrice")
        val, err = factorial_moment_integral(level, nodes=config.kacrice_nodes,
                                             draws=config.kacrice_draws, rng=rng)
        rec.extras["k2_integral"] = float(val)
        rec.extras["k2_integral_stderr"] = err
        rec.extras["factorial_moment"] = float(pm.mean())
        rec.extras["factorial_moment_stderr"] = math.sqrt(_variance(pm) / pm.size)
        rec.checks["kacrice"] = bool(abs(val - pm.mean()) <= b.kacrice_rel * pm.mean())
    rec.extras = {k: float(v) for k, v in rec.extras.items()}
    for k in ("mu4", "var_I4_exact", "ks_distance_J"):
        v = getattr(rec, k)
        setattr(rec, k, None if v is None else float(v))
    return rec


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    t0 = time.perf_counter()
    records = []
    for n in config.n:
        level = enumerate_level(n)
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            reps = list(pool.map(lambda r: run_replication(level, config, r),
                                 range(config.replications)))
        records.append(_summarize(level, config, reps))
    report = ExperimentReport(
        records=records,
        metadata={
            "seed": config.master_seed,
            "version": __version__,
            "wall_time": time.perf_counter() - t0,
            "config": config.to_dict(),
        },
    )
    for rec in records:
        if rec.invalid_count > MAX_INVALID_FRACTION * rec.replications:
            raise ExperimentFailed(
                f"n={rec.n}: {rec.invalid_count} of {rec.replications} replications invalid", report
            )
    return report


# -- persistence --------------------------------------------------------------------

_SCALAR_FIELDS = [f.name for f in fields(LevelRecord) if f.name not in ("checks", "extras")]
_INT_FIELDS = {"n", "N", "replications", "invalid_count"}


def report_to_csv(report: ExperimentReport) -> str:
    checks = sorted({k for r in report.records for k in r.checks})
    extras = sorted({k for r in report.records for k in r.extras})
    header = _SCALAR_FIELDS + [f"check:{k}" for k in checks] + [f"extra:{k}" for k in extras]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in report.records:
        row = ["" if getattr(r, k) is None else repr(getattr(r, k)) for k in _SCALAR_FIELDS]
        row += ["" if k not in r.checks else str(r.checks[k]).lower() for k in checks]
        row += ["" if k not in r.extras else repr(r.extras[k]) for k in extras]
        w.writerow(row)
    return buf.getvalue()


def records_from_csv(text: str) -> list[LevelRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        kw = {}
        for k in _SCALAR_FIELDS:
            v = row[k]
            kw[k] = None if v == "" else (int(v) if k in _INT_FIELDS else float(v))
        kw["checks"] = {k[6:]: v == "true" for k, v in row.items() if k.startswith("check:") and v}
        kw["extras"] = {k[6:]: float(v) for k, v in row.items() if k.startswith("extra:") and v}
        out.append(LevelRecord(**kw))
    return out


def persist(report: ExperimentReport, path) -> Path:
    """Write the JSON report and a CSV summary next to it; returns the CSV path."""
    path = Path(path)
    path.write_text(report.to_json())
    csv_path = path.with_suffix(".csv")
    csv_path.write_text(report_to_csv(report))
    return csv_path


def load(path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text()))
