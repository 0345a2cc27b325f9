"""Command line entry point: ``phasesing <command>``."""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path

import click
import yaml

from . import __version__
from .chaos import EXTRA_QUARTIC_CASES, QUARTIC_CASES, projection2, quartic_identity
from .harness import (
    CHECKS,
    ExperimentConfig,
    ExperimentFailed,
    load,
    persist,
    report_to_csv,
    run_experiment,
    stream,
)
from .kacrice import radial_scan
from .lattice import CapExceededError, correlation_count, require_level, mu_hat, scan_levels
from .wavefield import evaluate_grid, sample_wave
from .zerofinder import default_cells, locate_zeros

# flags of ``simulate`` that may also come from a config file
_CONFIG_KEYS = ("n", "reps", "seed", "checks", "cells", "out", "workers")


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise click.BadParameter("config file must hold a mapping", param_hint="--config")
    unknown = set(data) - set(_CONFIG_KEYS)
    if unknown:
        raise click.BadParameter(f"unknown keys {sorted(unknown)}", param_hint="--config")
    return data


def _int_list(value) -> list[int]:
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


def _check_set(value) -> set[str]:
    if isinstance(value, (list, tuple, set)):
        return {str(v) for v in value}
    return {v.strip() for v in str(value).split(",") if v.strip()}


def _writer(stream_):
    return csv.writer(stream_, lineterminator="\n")


@click.group()
@click.version_option(__version__)
def main():
    """Phase singularities of complex arithmetic random waves."""


@main.command()
@click.option("--n", "n", default=None, help="Level or comma-separated levels.")
@click.option("--reps", type=int, default=None, help="Replications per level.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--checks", default=None, help=f"Comma-separated subset of {','.join(CHECKS)}.")
@click.option("--cells", type=int, default=None, help="Cells per axis for the zero scan.")
@click.option("--out", default=None, help="JSON report path (a CSV summary is written alongside).")
@click.option("--workers", type=int, default=None, help="Worker threads.")
@click.option("--config", "config_path", default=None, help="YAML or JSON file with the same fields.")
@click.option("--zeros-csv", default=None, help="Dump the zeros of replication 0 of the first level.")
@click.option("--dump-grid", default=None, help="Dump field values of replication 0 on a grid.")
@click.option("--grid-size", type=int, default=None, help="Grid size for --dump-grid.")
def simulate(n, reps, seed, checks, cells, out, workers, config_path, zeros_csv, dump_grid, grid_size):
    """Run Monte Carlo checks; exit code 0 iff every requested check passes."""
    cfg = _read_config(config_path)
    flags = {"n": n, "reps": reps, "seed": seed, "checks": checks, "cells": cells,
             "out": out, "workers": workers}
    merged = {**cfg, **{k: v for k, v in flags.items() if v is not None}}
    if "n" not in merged:
        raise click.UsageError("--n is required (on the command line or in --config)")
    try:
        config = ExperimentConfig(
            n=tuple(_int_list(merged["n"])),
            replications=int(merged.get("reps", 100)),
            master_seed=int(merged.get("seed", 0)),
            cells_per_axis=merged.get("cells"),
            checks=_check_set(merged.get("checks", "mean")),
            output_path=merged.get("out"),
            workers=int(merged.get("workers", 1)),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc

    if zeros_csv or dump_grid:
        level = require_level(config.n[0])
        sample = sample_wave(level, stream(config.master_seed, level.n, 0, "wave"))
        if zeros_csv:
            zs = locate_zeros(sample, config.cells_per_axis or default_cells(level.n))
            with open(zeros_csv, "w", newline="") as fh:
                w = _writer(fh)
                w.writerow(["x1", "x2", "charge", "detjac"])
                w.writerows(zs.csv_rows())
        if dump_grid:
            m = grid_size or 20 * math.isqrt(level.n - 1) + 20
            with open(dump_grid, "w", newline="") as fh:
                w = _writer(fh)
                w.writerow(["x1", "x2", "t", "that", "dt1", "dt2", "dth1", "dth2"])
                w.writerows(evaluate_grid(sample, m).csv_rows())

    try:
        report = run_experiment(config)
    except ExperimentFailed as exc:
        click.echo(f"error: {exc}", err=True)
        if config.output_path:
            persist(exc.report, config.output_path)
        sys.exit(1)
    if config.output_path:
        persist(report, config.output_path)
    for rec in report.records:
        for name, ok in sorted(rec.checks.items()):
            click.echo(f"n={rec.n} {name}: {'PASS' if ok else 'FAIL'}")
    sys.exit(0 if report.passed else 1)


@main.command()
@click.option("--range", "range_", default="1:100", help="lo:hi, inclusive.")
@click.option("--order6/--no-order6", default=False, help="Also count S_6 (small levels only).")
def lattice(range_, order6):
    """CSV of representable levels: n,N,mu4,r4[,r6]."""
    lo, hi = (int(v) for v in range_.split(":"))
    w = _writer(sys.stdout)
    w.writerow(["n", "N", "mu4", "r4"] + (["r6"] if order6 else []))
    for level in scan_levels(lo, hi):
        row = [level.n, level.multiplicity, repr(mu_hat(level, 4)),
               repr(correlation_count(level, 4).normalized_moment)]
        if order6:
            try:
                row.append(repr(correlation_count(level, 6).normalized_moment))
            except CapExceededError:
                row.append("")
        w.writerow(row)


@main.command("chaos-check")
@click.option("--n", "n", type=int, required=True)
@click.option("--reps", type=int, default=50)
@click.option("--seed", type=int, default=0)
@click.option("--tol", type=float, default=1e-9, help="Tolerance for the quartic identities.")
def chaos_check(n, reps, seed, tol):
    """Exact chaos identities on random samples; CSV check,n,samples,max_abs_err,pass."""
    level = require_level(n)
    samples = [sample_wave(level, stream(seed, n, r, "wave")) for r in range(reps)]
    rows = []
    for case in QUARTIC_CASES + EXTRA_QUARTIC_CASES:
        err = max(abs(q - c) for q, c in (quartic_identity(s, case) for s in samples))
        rows.append((f"quartic_{case}", err, err <= tol))
    err = max(abs(projection2(s)) for s in samples)
    rows.append(("projection2", err, err <= 1e-8))
    w = _writer(sys.stdout)
    w.writerow(["check", "n", "samples", "max_abs_err", "pass"])
    for name, err, ok in rows:
        w.writerow([name, n, reps, repr(float(err)), str(bool(ok)).lower()])
    sys.exit(0 if all(ok for _, _, ok in rows) else 1)


@main.command()
@click.option("--n", "n", type=int, required=True)
@click.option("--draws", type=int, default=20_000)
@click.option("--seed", type=int, default=0)
def kacrice(n, draws, seed):
    """Radial scan of det Omega, Psi and K_2; CSV x_norm,direction,det_omega,psi,k2,k2_stderr."""
    level = require_level(n)
    radii = [10.0**-k / math.sqrt(n) for k in (1, 2, 3, 4, 5)]
    rng = stream(seed, n, 0, "kacrice")
    w = _writer(sys.stdout)
    w.writerow(["x_norm", "direction", "det_omega", "psi", "k2", "k2_stderr"])
    for p in radial_scan(level, radii, draws=draws, rng=rng):
        w.writerow([repr(p.x_norm), p.direction, repr(p.det_omega), repr(p.psi),
                    repr(p.k2), repr(p.k2_stderr)])


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def report(in_path, fmt):
    """Print a stored report; exit code 0 iff all its checks passed."""
    rep = load(in_path)
    click.echo(report_to_csv(rep) if fmt == "csv" else rep.to_json(), nl=False)
    sys.exit(0 if rep.passed else 1)


if __name__ == "__main__":
    main()
