from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from distortion_lab.errors import DepthError, DomainError, BudgetError, ValidationError
from distortion_lab.ifs_core import (
    IfsMap,
    IfsPair,
    approx_depth,
    cantor_approx,
    endpoint_set,
    interval_cover,
    new_node_table,
    new_nodes,
    recenter,
    validate_ifs,
    word_map,
)


def _names(report):
    return {c.name for c in report.failures}


def test_ternary_accepted(ternary):
    report = validate_ifs(ternary)
    assert report.accepted, report.to_json()


def test_shifted_second_map_rejected(ternary):
    phi1 = IfsMap.from_monomial([0.3, 1 / 3], "fixes_one")
    bad = IfsPair(ternary.phi0, phi1, 0.3, 0.34, 2.0, 0.6)
    report = validate_ifs(bad)
    assert not report.accepted
    assert "phi1_fixed_point" in _names(report)
    with pytest.raises(ValidationError):
        report.raise_for_failure()


def test_rho_above_half_rejected(ternary):
    bad = ternary.with_class(rho=0.6)
    assert "class_parameters" in _names(validate_ifs(bad))


def test_monomial_and_centered_forms_agree():
    m = IfsMap.from_monomial([0.1, 0.2, 0.3], "free")
    x = np.linspace(0, 1, 11)
    assert np.allclose(m(x), 0.1 + 0.2 * x + 0.3 * x**2, atol=1e-15)
    back = recenter(recenter([0.1, 0.2, 0.3], 0.0, 0.5), 0.5, 0.0)
    assert np.allclose(back, [0.1, 0.2, 0.3], atol=1e-15)


def test_json_roundtrip(ternary):
    assert IfsPair.from_json(ternary.to_json()) == ternary


@pytest.mark.parametrize(
    "w,x,expected",
    [((), 0.5, 0.5), ((0, 1), 0.0, 2 / 9), ((1, 1), 1.0, 1.0)],
)
def test_word_map_examples(ternary, w, x, expected):
    assert word_map(ternary, w, x) == pytest.approx(expected, abs=1e-15)


def test_word_map_rejects_outside_unit_interval(ternary):
    with pytest.raises(DomainError):
        word_map(ternary, (0,), 1.5)


def test_endpoint_set_levels(ternary):
    assert np.allclose(endpoint_set(ternary, 1), [0, 1 / 3, 2 / 3, 1], atol=1e-15)
    expect = np.array([0, 1, 2, 3, 6, 7, 8, 9]) / 9
    assert np.allclose(endpoint_set(ternary, 2), expect, atol=1e-15)


def test_endpoint_set_level_one_structure(random_pairs):
    for pair in random_pairs:
        c1 = endpoint_set(pair, 1)
        assert c1[0] == 0 and c1[-1] == 1
        assert c1[1] == pytest.approx(pair.phi0(1.0)) and c1[2] == pytest.approx(pair.phi1(0.0))
        assert c1[1] < c1[2]


def test_endpoint_cardinality_and_nesting(random_pairs):
    for pair in random_pairs:
        prev = endpoint_set(pair, 1)
        for n in range(2, 9):
            cur = endpoint_set(pair, n)
            assert cur.size == 2 ** (n + 1)
            assert np.all(np.isin(prev, cur))
            prev = cur


def test_new_nodes(ternary, random_pairs):
    assert np.allclose(new_nodes(ternary, 2), np.array([1, 2, 7, 8]) / 9, atol=1e-15)
    n3 = new_nodes(ternary, 3)
    c2 = endpoint_set(ternary, 2)
    assert n3.size == 8
    assert np.all((n3 > 0) & (n3 < 1)) and not np.any(np.isin(n3, c2))
    for pair in random_pairs:
        assert new_nodes(pair, 2).size == 4


def test_difference_law(random_pairs):
    # C_n \ C_{n-1} is exactly the new-node set
    for pair in random_pairs:
        for n in range(2, 9):
            diff = np.setdiff1d(endpoint_set(pair, n), endpoint_set(pair, n - 1))
            assert np.array_equal(diff, new_nodes(pair, n))


def test_new_node_table_rows(ternary):
    rows = new_node_table(ternary, 2)
    assert len(rows) == 2
    values = sorted(v for row in rows for v in row[1:])
    assert np.allclose(values, np.array([1, 2, 7, 8]) / 9)


def test_interval_cover(ternary, random_pairs):
    c1 = interval_cover(ternary, 1)
    assert np.allclose(c1.rows(), [[0, 1 / 3], [2 / 3, 1]])
    assert c1.gaps().min() >= ternary.rho_tilde * (1 - 2 * ternary.rho)
    c2 = interval_cover(ternary, 2)
    assert np.allclose(c2.lengths(), 1 / 9)
    for pair in random_pairs:
        for n in range(1, 8):
            cov = interval_cover(pair, n)
            assert cov.lengths().max() <= pair.rho**n + 1e-15
            assert cov.gaps().min() >= pair.rho_tilde**n * (1 - 2 * pair.rho) - 1e-12


def test_cantor_approx_depths(ternary):
    assert approx_depth(ternary, 0.4) == 1 and cantor_approx(ternary, 0.4).size == 4
    assert approx_depth(ternary, 0.1) == 3 and cantor_approx(ternary, 0.1).size == 16
    assert approx_depth(ternary, 0.5) == 1


def test_cantor_approx_errors(ternary):
    with pytest.raises(DomainError):
        approx_depth(ternary, 0.0)
    with pytest.raises(BudgetError):
        cantor_approx(ternary, 1e-9, point_cap=1000)
    with pytest.raises(DepthError):
        endpoint_set(ternary, 40)


def test_ternary_endpoints_are_triadic_rationals(ternary):
    pts = endpoint_set(ternary, 5)
    scaled = pts * 3**5
    assert np.allclose(scaled, np.round(scaled), atol=1e-9)
    assert Fraction(round(pts[1] * 3**5), 3**5) == Fraction(1, 243)
