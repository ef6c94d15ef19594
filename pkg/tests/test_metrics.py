from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from distortion_lab.errors import HoleViolation, SupportTooLarge
from distortion_lab.ifs_core import endpoint_set
from distortion_lab.metrics import (
    CERTIFIED,
    INCONCLUSIVE,
    AtomicMeasure,
    Hole,
    bernoulli_measure,
    hausdorff,
    hole_certificate,
    kantorovich_1d,
    kantorovich_lp,
    kantorovich_to_uniform,
    point_cloud,
    separation_certificate,
)


def test_hausdorff_examples():
    assert hausdorff([0.0], [1.0]) == 1.0
    assert hausdorff([0.0, 1.0], [0.0, 0.4, 1.0]) == pytest.approx(0.4)
    a = np.random.default_rng(0).random((50, 2))
    assert hausdorff(a, a) == 0.0


def test_hausdorff_periodic():
    a = np.array([[0.05, 0.0]])
    b = np.array([[6.2, 0.0]])
    plain = hausdorff(a, b)
    wrapped = hausdorff(a, b, period=[2 * np.pi, None])
    assert plain == pytest.approx(6.15)
    assert wrapped == pytest.approx(2 * np.pi - 6.15)


def test_point_cloud_canonical():
    assert np.array_equal(point_cloud([0.3, 0.1, 0.1, 0.2]), [0.1, 0.2, 0.3])


def test_certificate_examples():
    A = [0.0, 0.3, 0.7, 1.0]
    B = [0.0, 0.35, 0.7, 1.0]
    cert = separation_certificate(A, Hole(0.3, 0.7), B, Hole(0.35, 0.7), 0.04)
    assert cert.status == CERTIFIED
    narrow = hole_certificate(0.3, 0.7, 0.5, 0.7, 0.15)
    assert narrow.status == INCONCLUSIVE and not narrow.widths_ok
    same = hole_certificate(0.3, 0.7, 0.3, 0.7, 0.01)
    assert same.status == INCONCLUSIVE


def test_certificate_needs_a_witness():
    # widths and displacement pass, but the sets are only 0.05 apart
    cert = hole_certificate(0.1, 0.9, 0.85, 0.99, 0.06)
    assert cert.widths_ok and cert.displacement_ok
    assert cert.status == INCONCLUSIVE
    assert hausdorff([0.1, 0.9, 0.99], [0.1, 0.85, 0.99]) == pytest.approx(0.05)


def test_certificate_exact_arithmetic():
    u = Fraction(1, 2**60)
    cert = hole_certificate(Fraction(0), 10 * u, 3 * u, 10 * u, u)
    assert cert.certified and cert.witness_depth == 3 * u


def test_hole_violations():
    with pytest.raises(HoleViolation):
        Hole(0.5, 0.5)
    with pytest.raises(HoleViolation):
        separation_certificate([0.0, 0.5, 1.0], Hole(0.0, 1.0), [0.0, 1.0], Hole(0.0, 1.0), 0.1)


def test_w1_examples():
    d0, d1 = AtomicMeasure.dirac(0.0), AtomicMeasure.dirac(1.0)
    half = AtomicMeasure([[0.0], [1.0]], [Fraction(1, 2)] * 2)
    assert kantorovich_1d(d0, d1) == 1.0
    assert kantorovich_1d(half, half) == 0.0
    assert kantorovich_1d(d0, half) == 0.5
    assert kantorovich_lp(AtomicMeasure.dirac([0.0, 0.0]), AtomicMeasure.dirac([3.0, 4.0])) == pytest.approx(5.0)
    mu2 = AtomicMeasure(np.random.default_rng(1).random((6, 2)), [Fraction(1, 6)] * 6)
    assert kantorovich_lp(mu2, mu2) == pytest.approx(0.0, abs=1e-15)


def _weights(rng, n):
    raw = [int(v) for v in rng.integers(1, 9, n)]
    return [Fraction(v, sum(raw)) for v in raw]


def test_w1_lp_matches_1d():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n, m = rng.integers(1, 20, size=2)
        mu = AtomicMeasure(rng.random((n, 1)), _weights(rng, n))
        nu = AtomicMeasure(rng.random((m, 1)), _weights(rng, m))
        assert kantorovich_lp(mu, nu) == pytest.approx(kantorovich_1d(mu, nu), abs=1e-9)


def test_lp_support_cap():
    big = AtomicMeasure.uniform(np.linspace(0, 1, 70)[:, None])
    with pytest.raises(SupportTooLarge):
        kantorovich_lp(big, big)


def test_measure_normalisation_and_json():
    mu = AtomicMeasure([[0.2], [0.2], [0.7]], [Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)])
    assert list(mu.weights) == [Fraction(1, 2), Fraction(1, 2)]
    with pytest.raises(ValueError):
        AtomicMeasure([[0.0], [1.0]], [1, 1])
    assert AtomicMeasure.from_json(mu.to_json()).weights == mu.weights


def test_bernoulli(ternary):
    mu = bernoulli_measure(ternary, 1)
    assert np.allclose(mu.positions.ravel(), [0.0, 2 / 3])
    assert list(mu.weights) == [Fraction(1, 2), Fraction(1, 2)]
    for n in (2, 5, 8):
        assert sum(bernoulli_measure(ternary, n).weights) == 1


def test_bernoulli_levels_converge(ternary):
    d = kantorovich_1d(bernoulli_measure(ternary, 2), bernoulli_measure(ternary, 5))
    assert d <= 1 / 9
    assert d == pytest.approx(0.053497942386831254, abs=1e-15)


def test_comb_to_uniform():
    comb = AtomicMeasure.uniform((np.arange(4)[:, None] + 0.5) / 4)
    assert kantorovich_to_uniform(comb) == pytest.approx(0.0625, abs=1e-15)
    assert kantorovich_to_uniform(AtomicMeasure.dirac(0.5)) == pytest.approx(0.25)


def test_endpoint_sets_close_in_hausdorff(ternary):
    assert hausdorff(endpoint_set(ternary, 3), endpoint_set(ternary, 8)) <= 3.0**-3
