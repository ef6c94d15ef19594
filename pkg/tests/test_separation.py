from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from distortion_lab.errors import (
    ClassEscape,
    DriftViolation,
    DuplicateNodes,
    ExponentGapTooSmall,
    GammaTooSmall,
    GrowthOverflow,
    HypothesisViolation,
)
from distortion_lab.ifs_core import endpoint_set, random_pair
from distortion_lab.metrics import hausdorff
from distortion_lab import separation as S


def test_interpolation_examples(ternary):
    zero = S.lagrange_interpolate([0.0, 1.0], [0.0, 0.0])
    assert np.all(zero(np.linspace(0, 1, 5)) == 0)

    nodes = np.array([0, 1 / 3, 2 / 3, 1])
    vals = np.array([0, 0, 0, 0.01])
    p = S.lagrange_interpolate(nodes, vals)
    direct = np.linalg.solve(np.vander(nodes, increasing=True), vals)
    x = np.linspace(0, 1, 17)
    assert np.allclose(p(x), np.polyval(direct[::-1], x), atol=1e-15)
    assert np.allclose(p(nodes), vals, atol=1e-17)

    c2 = endpoint_set(ternary, 2)
    eps1 = 1e-6
    q = S.lagrange_interpolate(c2, np.where(np.isclose(c2, 1 / 9), eps1, 0.0))
    assert q(1 / 9) == pytest.approx(eps1)
    assert np.max(np.abs(q(c2[~np.isclose(c2, 1 / 9)]))) < 1e-20


def test_interpolation_duplicate_nodes():
    with pytest.raises(DuplicateNodes):
        S.lagrange_interpolate([0.0, 0.5, 0.5], [0, 1, 2])


def test_centered_coeffs_and_derivative():
    p = S.lagrange_interpolate([0.0, 0.25, 0.5, 1.0], [1.0, 2.0, 0.0, -1.0])
    c = p.centered_coeffs(0.5)
    x = np.linspace(0, 1, 9)
    assert np.allclose(np.polynomial.polynomial.polyval(x - 0.5, c), p(x), atol=1e-12)
    h = 1e-6
    assert np.allclose(p.derivative(x), (p(x + h) - p(x - h)) / (2 * h), atol=1e-6)


def test_lagrange_basis_exact():
    basis = S.lagrange_basis_coeffs([Fraction(0), Fraction(1, 2), Fraction(1)], center=Fraction(1, 2))
    # l_1(x) = 1 - 4 (x - 1/2)^2
    assert [Fraction(v) for v in basis[1]] == [Fraction(1), Fraction(0), Fraction(-4)]


def test_growth_bound(ternary):
    assert S.interp_growth_bound(ternary, 2, 0.0) == 0.0
    assert S.interp_growth_bound(ternary, 2, 1.0) == pytest.approx(2.44746181789315e19, rel=1e-12)
    assert S.interp_growth_log2(ternary, 2, 1.0) == pytest.approx(64.40792015581822, rel=1e-12)
    with pytest.raises(GrowthOverflow):
        S.interp_growth_bound(ternary, 30, 1.0)


def test_propagation_bound(ternary):
    assert S.propagation_bound(ternary, 0.0, 0.0) == 0.0
    assert S.propagation_bound(ternary, 1e-4, 1e-4) == pytest.approx(1.5151515151515154e-4, rel=1e-12)
    with pytest.raises(HypothesisViolation):
        S.propagation_bound(ternary, 1e-4, 1e-4, deriv_sum=1.5)


def test_propagation_bound_dominates_sampled(ternary):
    # perturb both maps by a small polynomial vanishing at the fixed points
    g = 1e-4
    pert = ternary
    from distortion_lab.ifs_core import IfsMap, IfsPair

    phi0 = IfsMap.from_monomial([0.0, 1 / 3 + g, -g], "fixes_zero")
    phi1 = IfsMap.from_monomial([2 / 3, 1 / 3 + g, -g], "fixes_one")
    pert = IfsPair(phi0, phi1, 0.3, 0.34, 2.0, 0.6)
    dist = hausdorff(endpoint_set(pert, 10), endpoint_set(ternary, 10))
    bound = S.propagation_bound(ternary, g / 4, g / 4)
    assert dist <= bound + 2 * 0.34**10


def test_family_small(ternary):
    fam = S.build_family(ternary, 2**-4, count=16, log2_eps1=-30, N=2, seed=0)
    r = fam.report
    assert len(fam.members) == 16
    assert r["closeness_ok"] and r["coefficient_closeness_ok"] and r["all_valid_relaxed"]
    assert r["pairwise_certified"] and r["pairs"] == 120
    assert r["j_cap"] == 972
    assert S.capacity_estimate(fam, 2**-30) == 16


def test_family_determinism(ternary):
    a = S.build_family(ternary, 2**-4, count=4, log2_eps1=-30, N=2, seed=3)
    b = S.build_family(ternary, 2**-4, count=4, log2_eps1=-30, N=2, seed=3)
    for ma, mb in zip(a.members, b.members):
        assert np.array_equal(ma.assignment.J, mb.assignment.J)
        assert np.array_equal(ma.g0, mb.g0) and np.array_equal(ma.g1, mb.g1)


def test_family_large_eps0_escapes_class(ternary):
    # the relaxed class rho + eps0 = 0.64 leaves rho < 1/2
    with pytest.raises(ClassEscape):
        S.build_family(ternary, 0.3, count=16, log2_eps1=-60, N=2)


def test_family_on_schedule_gap(ternary):
    with pytest.raises(ExponentGapTooSmall):
        S.build_family(ternary, 2**-4, count=4, log2_eps1=-40)


def test_capacity_trivial(ternary):
    assert S.capacity_estimate([ternary], 0.01) == 1
    assert S.capacity_estimate([ternary, ternary], 0.01) == 1


def test_net_ternary(ternary):
    assert S.net_degree(ternary, 1e-3) == 69
    elements = S.quantize_to_net(ternary, 1e-3)
    assert all(e.in_box for e in elements)
    rec = S.reconstruct(elements, ternary)
    for m_rec, m in zip(rec.maps, ternary.maps):
        assert np.max(np.abs(np.array(m_rec.coeffs[:2]) - np.array(m.coeffs))) <= S.net_step(ternary, 1e-3) / 2
        assert np.all(np.array(m_rec.coeffs[2:]) == 0)
    again = S.reconstruct(S.quantize_to_net(rec, 1e-3), ternary)
    assert again.phi0.coeffs == rec.phi0.coeffs and again.phi1.coeffs == rec.phi1.coeffs


def test_net_count_arithmetic(ternary):
    assert S.net_count_log2(ternary, 1e-3) == pytest.approx(1067.3030029369945, rel=1e-12)
    assert S.net_count_log2(ternary, 1e-3) <= S.net_count_bound_log2(ternary, 1e-3)


def test_net_reconstruction_close():
    rng = np.random.default_rng(11)
    pair = random_pair(rng, degree=40)
    eps = 2**-8
    rec = S.reconstruct(S.quantize_to_net(pair, eps), pair)
    assert hausdorff(endpoint_set(rec, 12), endpoint_set(pair, 12)) <= eps


def test_refinement_schedule():
    st = S.refinement_schedule(8, 40, 2, 0.45, 0.47, 2.0, 0.6)
    assert [s.log2_eps for s in st] == [-8, -320]
    assert st[1].rho_tilde == 0.45 - 2**-8 and st[1].rho == 0.47 + 2**-8 and st[1].Q == 2 + 2**-8
    assert len(S.refinement_schedule(8, 40, 1, 0.45, 0.47, 2.0, 0.6)) == 1
    with pytest.raises(GammaTooSmall):
        S.refinement_schedule(8, 40, 2, 0.3, 0.34, 2.0, 0.6)
    with pytest.raises(DriftViolation):
        S.refinement_schedule(1, 40, 3, 0.45, 0.499, 2.0, 0.6)
    assert S.drift_sum(8, 40, 2) == 2**-8 + 2**-320
