from __future__ import annotations

import math

import numpy as np
import pytest

from distortion_lab import complexity as cx
from distortion_lab.coding import BitReader, BitWriter, int_width
from distortion_lab.errors import DecodeError, InsufficientRows
from distortion_lab.ifs_core import cantor_approx, endpoint_set, random_pair
from distortion_lab.metrics import AtomicMeasure, bernoulli_measure, hausdorff


def test_gamma_roundtrip():
    w = BitWriter()
    vals = [1, 2, 3, 7, 8, 1000, 2**40]
    for v in vals:
        w.write_gamma(v)
    w.write_int(-5, 4)
    w.write_signed(-17)
    r = BitReader(w.bits())
    assert [r.read_gamma() for _ in vals] == vals
    assert r.read_int(4) == -5 and r.read_signed() == -17
    assert r.remaining() == 0
    with pytest.raises(DecodeError):
        r.read_bit()


def test_gamma_lengths():
    w = BitWriter()
    w.write_gamma(1)
    assert len(w) == 1
    w = BitWriter()
    w.write_gamma(5)
    assert w.bits() == [0, 0, 1, 0, 1]


def test_int_width():
    assert int_width(0, 0) == 0
    assert int_width(-1, 0) == 1
    assert int_width(-8, 7) == 4
    assert int_width(0, 8) == 5


def test_hex_envelope_roundtrip(ternary):
    d = cx.encode_ifs_poly(ternary, 2**-6)
    back = cx.EncodedDescription.from_json(d.to_json())
    assert back.bits == d.bits and back.tag == cx.IFS_POLY
    assert np.array_equal(cx.decode(back), cx.decode(d))


def test_raw_grid_single_point():
    d = cx.encode_raw_grid([0.5], 0.5)
    out = cx.decode(d)
    assert out.size == 1 and abs(out[0] - 0.5) <= 0.25


def test_raw_grid_bits_per_point(ternary):
    for k in range(4, 17, 2):
        eps = 2.0**-k
        pts = cantor_approx(ternary, eps)
        d = cx.encode_raw_grid(pts, eps)
        assert d.bit_len / (pts.size * math.log2(1 / eps)) <= 4


def test_trailing_bits_rejected(ternary):
    d = cx.encode_ifs_poly(ternary, 2**-6)
    bad = cx.EncodedDescription(d.tag, d.eps, d.bits + [0], d.meta)
    with pytest.raises(DecodeError):
        cx.decode(bad)
    with pytest.raises(DecodeError):
        cx.decode(cx.EncodedDescription("NOPE", 0.1, [1], {}))


def test_ifs_poly_frozen_bits(ternary):
    bits = {k: cx.encode_ifs_poly(ternary, 2.0**-k).bit_len for k in (4, 8, 10, 12, 16)}
    assert bits == {4: 62, 8: 78, 10: 92, 12: 100, 16: 116}
    raw = {k: cx.raw_grid_for_pair(ternary, 2.0**-k).bit_len for k in (8, 10, 12)}
    assert all(bits[k] <= raw[k] for k in raw)


def test_ifs_poly_additive_growth(ternary):
    b = [cx.encode_ifs_poly(ternary, 2.0**-k).bit_len for k in range(6, 15)]
    assert max(np.diff(b)) <= 12


def test_ifs_decode_determinism(ternary):
    d = cx.encode_ifs_poly(ternary, 2**-10)
    assert np.array_equal(cx.decode(d), cx.decode(d))


def test_ifs_analytic_degree80():
    pair = random_pair(np.random.default_rng(7), degree=80)
    d = cx.encode_ifs_analytic(pair, 2**-8)
    ref = endpoint_set(pair, cx.approx_depth(pair, 2**-9) + 6)
    assert hausdorff(cx.decode(d), ref) <= 2**-8


def test_measures(ternary):
    d = cx.encode_measure(AtomicMeasure.dirac(0.3), 0.1)
    assert d.bit_len == 20
    mu = bernoulli_measure(ternary, 6)
    assert cx.encode_measure(mu, 2**-6).meta["distance"] <= 2**-6
    bits = [cx.encode_lebesgue_comb(2.0**-k).bit_len for k in range(2, 12)]
    assert bits == list(range(4, 24, 2))


def test_fit_growth_planted():
    eps = [2.0**-k for k in range(2, 12)]
    lin = cx.fit_growth([(e, 7 * math.log2(1 / e)) for e in eps])
    assert abs(lin.fits["linear"]["b"] - 7) < 1e-6
    assert abs(lin.fits["full_quadratic"]["c"]) < 1e-6
    quad = cx.fit_growth([(e, 3 * math.log2(1 / e) ** 2) for e in eps])
    assert quad.preferred == "quadratic" and abs(quad.fits["quadratic"]["b"] - 3) < 1e-6
    with pytest.raises(InsufficientRows):
        cx.fit_growth([(e, 1.0) for e in eps[:3]])
    with pytest.raises(ValueError):
        cx.fit_growth([(e, 1.0) for e in eps[::-1]])


def test_monotone_envelope():
    rows = [(0.5, 10), (0.25, 8), (0.125, 12)]
    assert cx.monotone_envelope(rows) == [(0.5, 8), (0.25, 8), (0.125, 12)]


def test_growth_rows_parallel_matches_serial(ternary):
    eps = [2.0**-k for k in range(4, 9)]
    enc = lambda e: cx.encode_ifs_poly(ternary, e)  # noqa: E731
    assert cx.growth_rows(enc, eps, workers=1) == cx.growth_rows(enc, eps, workers=4)
