import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasesing.lattice import (
    CapExceededError,
    Frequency,
    correlation_count,
    enumerate_level,
    mu_hat,
    require_level,
    scan_levels,
    spectral_measure,
)

LEVELS = list(scan_levels(1, 400))
SMALL = [lv for lv in LEVELS if lv.multiplicity <= 40]


def brute_count(level, order):
    pts = level.points
    count = 0
    for tup in itertools.product(pts, repeat=order):
        s1 = sum((-1) ** k * p[0] for k, p in enumerate(tup))
        s2 = sum((-1) ** k * p[1] for k, p in enumerate(tup))
        count += s1 == 0 and s2 == 0
    return count


def test_n5_points():
    lv = enumerate_level(5)
    assert lv.multiplicity == 8
    expected = {(s * a, t * b) for a, b in ((1, 2), (2, 1)) for s in (1, -1) for t in (1, -1)}
    assert set(lv.points) == expected
    assert list(lv.points) == sorted(lv.points)


def test_non_representable():
    assert enumerate_level(3) is None
    assert enumerate_level(21) is None
    with pytest.raises(ValueError):
        require_level(3)
    with pytest.raises(ValueError):
        enumerate_level(0)


def test_n25_points():
    lv = enumerate_level(25)
    brute = sorted((a, b) for a in range(-5, 6) for b in range(-5, 6) if a * a + b * b == 25)
    assert [tuple(p) for p in lv.points] == brute
    assert lv.multiplicity == 12
    assert lv.eigenvalue == pytest.approx(4 * math.pi**2 * 25)


def test_mu_hat_examples():
    assert mu_hat(require_level(1), 4) == pytest.approx(1.0, abs=1e-15)
    assert mu_hat(require_level(2), 4) == pytest.approx(-1.0, abs=1e-15)
    lv = require_level(25)
    raw = sum(((a + 1j * b) ** 4).real for a, b in lv.points)
    assert raw == -1716
    assert mu_hat(lv, 4) == pytest.approx(-1716 / 7500, abs=1e-14)
    assert spectral_measure(lv).fourth_coefficient == pytest.approx(-0.2288, abs=1e-14)


def test_mu_hat_negative_k_matches():
    lv = require_level(65)
    for k in (4, 8, 12):
        assert mu_hat(lv, -k) == pytest.approx(mu_hat(lv, k), abs=1e-13)


def test_correlation_count_examples():
    assert correlation_count(require_level(25), 4).count == 396
    assert correlation_count(require_level(1), 4).count == 36


def test_order6_brute_force_n5():
    lv = require_level(5)
    c = correlation_count(lv, 6)
    assert c.count == brute_count(lv, 6)
    assert c.count >= lv.multiplicity**3


def test_order6_growth_bounded():
    ratios = [correlation_count(lv, 6).count / lv.multiplicity**3.5
              for lv in LEVELS if lv.multiplicity <= 32]
    assert max(ratios) < 10


def test_order6_cap():
    lv = require_level(5525)  # N = 48
    with pytest.raises(CapExceededError):
        correlation_count(lv, 6, cap=40)
    with pytest.raises(ValueError):
        correlation_count(lv, 5)


@pytest.mark.parametrize("level", SMALL[:12], ids=lambda lv: f"n{lv.n}")
def test_order4_brute_force(level):
    assert brute_count(level, 4) == 3 * level.multiplicity * (level.multiplicity - 1)


@pytest.mark.parametrize("level", SMALL, ids=lambda lv: f"n{lv.n}")
def test_order4_closed_form(level):
    c = correlation_count(level, 4)
    assert c.count == 3 * level.multiplicity * (level.multiplicity - 1)
    N = level.multiplicity
    assert c.normalized_moment == pytest.approx(3 * (N - 1) / N**3, rel=1e-15)


@pytest.mark.parametrize("level", LEVELS, ids=lambda lv: f"n{lv.n}")
def test_level_invariants(level):
    pts = set(level.points)
    assert all(a * a + b * b == level.n for a, b in pts)
    assert {Frequency(-a, -b) for a, b in pts} == pts
    assert {Frequency(-b, a) for a, b in pts} == pts
    assert level.multiplicity % 4 == 0
    assert level.moment(1, 1) == 0
    assert 2 * level.moment(2, 0) == level.n * level.multiplicity
    assert level.moment(2, 0) == level.moment(0, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=5000), st.integers(min_value=1, max_value=16))
def test_mu_hat_support(n, k):
    lv = enumerate_level(n)
    if lv is None:
        return
    v = mu_hat(lv, k)
    assert -1 - 1e-12 <= v <= 1 + 1e-12
    if k % 4:
        assert abs(v) < 1e-12


def test_antipode_and_half():
    lv = require_level(65)
    arr = lv.array
    assert np.array_equal(arr[lv.antipode], -arr)
    assert len(lv.half) * 2 == lv.multiplicity
    assert len(set(lv.half) | set(lv.antipode[lv.half])) == lv.multiplicity
