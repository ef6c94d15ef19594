from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from distortion_lab.coding import BitReader, BitWriter
from distortion_lab.metrics import (
    AtomicMeasure,
    hausdorff,
    hole_certificate,
    kantorovich_1d,
    kantorovich_lp,
)

floats01 = st.floats(0, 1, allow_nan=False)
clouds = st.lists(floats01, min_size=1, max_size=30)


@given(clouds, clouds)
def test_hausdorff_symmetric_and_brute_force(a, b):
    d = hausdorff(a, b)
    assert d == hausdorff(b, a)
    A, B = np.array(a), np.array(b)
    M = np.abs(A[:, None] - B[None, :])
    assert abs(d - max(M.min(axis=1).max(), M.min(axis=0).max())) < 1e-15


@given(clouds, clouds, clouds)
def test_hausdorff_triangle(a, b, c):
    assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-12


@given(st.lists(st.integers(1, 2**62), min_size=1, max_size=20), st.lists(st.integers(-(2**20), 2**20), max_size=20))
def test_codes_roundtrip(us, ss):
    w = BitWriter()
    for u in us:
        w.write_gamma(u)
    for s in ss:
        w.write_signed(s)
    r = BitReader(w.bits())
    assert [r.read_gamma() for _ in us] == us
    assert [r.read_signed() for _ in ss] == ss
    assert r.remaining() == 0


@st.composite
def measures(draw):
    n = draw(st.integers(1, 8))
    xs = draw(st.lists(floats01, min_size=n, max_size=n))
    ws = draw(st.lists(st.integers(1, 9), min_size=n, max_size=n))
    total = sum(ws)
    return AtomicMeasure([[x] for x in xs], [Fraction(w, total) for w in ws])


@settings(max_examples=60, deadline=None)
@given(measures(), measures())
def test_w1_solvers_agree(mu, nu):
    assert abs(kantorovich_1d(mu, nu) - kantorovich_lp(mu, nu)) < 1e-9
    assert kantorovich_1d(mu, nu) == kantorovich_1d(nu, mu)


@st.composite
def hole_configs(draw):
    pts = sorted(set(draw(st.lists(st.integers(0, 40), min_size=3, max_size=12))))
    if len(pts) < 3:
        pts = [0, 20, 40]
    i = draw(st.integers(0, len(pts) - 2))
    return pts, i


@settings(max_examples=300, deadline=None)
@given(hole_configs(), hole_configs(), st.integers(1, 10))
def test_certificate_never_false_positive(ca, cb, e):
    (A, i), (B, j) = ca, cb
    cert = hole_certificate(Fraction(A[i]), Fraction(A[i + 1]), Fraction(B[j]), Fraction(B[j + 1]), Fraction(e))
    if cert.certified:
        assert hausdorff(A, B) > e
