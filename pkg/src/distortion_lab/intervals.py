"""Outward-rounded interval arithmetic on numpy arrays.

Only what polynomial range bounding needs: addition, multiplication and a
Horner evaluator over a subdivided domain.
"""
from __future__ import annotations

import numpy as np

_NEG = -np.inf
_POS = np.inf


def _down(x):
    return np.nextafter(x, _NEG)


def _up(x):
    return np.nextafter(x, _POS)


def iadd(alo, ahi, blo, bhi):
    return _down(alo + blo), _up(ahi + bhi)


def imul(alo, ahi, blo, bhi):
    p = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return _down(p.min(axis=0)), _up(p.max(axis=0))


def horner_range(coeffs_lo, coeffs_hi, tlo, thi):
    """Enclose sum_r c_r t^r for t in [tlo, thi] (elementwise over pieces).

    ``coeffs_lo``/``coeffs_hi`` bound each coefficient, lowest degree first.
    """
    tlo = np.asarray(tlo, dtype=float)
    thi = np.asarray(thi, dtype=float)
    lo = np.full_like(tlo, coeffs_lo[-1])
    hi = np.full_like(thi, coeffs_hi[-1])
    for clo, chi in zip(coeffs_lo[-2::-1], coeffs_hi[-2::-1]):
        lo, hi = imul(lo, hi, tlo, thi)
        lo, hi = iadd(lo, hi, clo, chi)
    return lo, hi


def polynomial_range(coeffs, a=0.0, b=1.0, center=0.5, pieces=1024, coeff_radius=None):
    """Certified (lo, hi) of a polynomial in (x - center) over [a, b].

    The domain is split into ``pieces`` equal subintervals; the enclosure is
    the union of the per-piece Horner enclosures. ``coeff_radius`` widens
    every coefficient symmetrically (used for rounded derivative
    coefficients).
    """
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return 0.0, 0.0
    rad = np.zeros_like(c) if coeff_radius is None else np.asarray(coeff_radius, float)
    clo, chi = _down(c - rad), _up(c + rad)
    edges = np.linspace(a, b, pieces + 1)
    tlo = _down(edges[:-1] - center)
    thi = _up(edges[1:] - center)
    lo, hi = horner_range(clo, chi, tlo, thi)
    return float(lo.min()), float(hi.max())
