"""Certified description-length surrogates and growth-curve fitting.

Every encoder returns an :class:`EncodedDescription` whose bits decode, with
the decoder named by its tag, to a point cloud (or atomic measure) within
the certified precision of the target. Certification happens at construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .coding import BitReader, BitWriter, hex_to_bits, int_width
from .errors import CertificationFailure, DecodeError, InsufficientRows
from .ifs_core import IfsMap, IfsPair, approx_depth, endpoint_set
from .metrics import AtomicMeasure, hausdorff, kantorovich_1d, kantorovich_lp, kantorovich_to_uniform
from .separation import net_degree, net_step

RAW_GRID = "RAW_GRID"
IFS_POLY = "IFS_POLY"
IFS_ANALYTIC = "IFS_ANALYTIC_NET"
MEASURE_ATOMIC = "MEASURE_ATOMIC"
HYP_JET = "HYP_JET"
TAGS = (RAW_GRID, IFS_POLY, IFS_ANALYTIC, MEASURE_ATOMIC, HYP_JET)

REFERENCE_EXTRA_DEPTH = 6


@dataclass
class EncodedDescription:
    tag: str
    eps: float
    bits: list
    meta: dict = field(default_factory=dict)

    @property
    def bit_len(self) -> int:
        return len(self.bits)

    def to_json(self) -> dict:
        w = BitWriter()
        w._bits = list(self.bits)
        return {"tag": self.tag, "eps": self.eps, "bits_hex": w.to_hex(), "bit_len": self.bit_len}

    @classmethod
    def from_json(cls, obj: dict) -> "EncodedDescription":
        return cls(obj["tag"], float(obj["eps"]), hex_to_bits(obj["bits_hex"], int(obj["bit_len"])))

    def reader(self) -> BitReader:
        return BitReader(self.bits)


def dyadic_exponent(step: float) -> int:
    """Smallest k >= 0 with 2**-k <= step."""
    if step <= 0:
        raise ValueError("step must be positive")
    k = max(0, math.ceil(-math.log2(step)))
    while 2.0**-k > step:
        k += 1
    return k


def cell_index(x, k: int) -> np.ndarray:
    """floor(x / 2**-k): grid origin at 0, ties toward -inf."""
    return np.floor(np.ldexp(np.asarray(x, dtype=float), k)).astype(np.int64)


def cell_center(idx, k: int) -> np.ndarray:
    return np.ldexp(np.asarray(idx, dtype=float) + 0.5, -k)


def _write_index_block(w: BitWriter, idx: np.ndarray) -> None:
    """Rows of integer cells: per-axis offset (signed gamma), width (gamma), then fixed-width fields."""
    w.write_gamma(idx.shape[0])
    lo = idx.min(axis=0)
    widths = []
    for j in range(idx.shape[1]):
        w.write_signed(int(lo[j]))
        span = int(idx[:, j].max() - lo[j])
        wd = span.bit_length()
        w.write_gamma0(wd)
        widths.append(wd)
    for row in idx - lo:
        for j, wd in enumerate(widths):
            w.write_uint(int(row[j]), wd)


def _read_index_block(r: BitReader, d: int) -> np.ndarray:
    n = r.read_gamma()
    lo, widths = [], []
    for _ in range(d):
        lo.append(r.read_signed())
        widths.append(r.read_gamma0())
    out = np.empty((n, d), dtype=np.int64)
    for i in range(n):
        for j in range(d):
            out[i, j] = r.read_uint(widths[j]) + lo[j]
    return out


# ---------------------------------------------------------------------------
# RAW_GRID


def encode_raw_grid(cloud, eps: float) -> EncodedDescription:
    """Occupied cells of a dyadic grid with step <= eps/2, written as absolute indices.

    The decode (cell centres) is within step/2 * sqrt(d) <= eps/2 of the input
    for d <= 4.
    """
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    d = pts.shape[1]
    k = dyadic_exponent(eps / 2)
    cells = np.unique(cell_index(pts, k), axis=0)
    w = BitWriter()
    w.write_gamma(d)
    w.write_gamma0(k)
    _write_index_block(w, cells)
    desc = EncodedDescription(RAW_GRID, eps, w.bits(), {"cells": int(cells.shape[0]), "k": k})
    dist = hausdorff(_squeeze(decode(desc)), _squeeze(pts))
    desc.meta["input_distance"] = dist
    if not dist <= eps / 2:
        raise CertificationFailure(f"raw grid decode is {dist:g} from input (> {eps / 2:g})", dist)
    return desc


def _decode_raw_grid(r: BitReader) -> np.ndarray:
    d = r.read_gamma()
    k = r.read_gamma0()
    cells = _read_index_block(r, d)
    pts = cell_center(cells, k)
    return pts[:, 0] if d == 1 else pts


def _squeeze(a):
    a = np.asarray(a)
    return a[:, 0] if a.ndim == 2 and a.shape[1] == 1 else a


def raw_grid_for_pair(pair: IfsPair, eps: float) -> EncodedDescription:
    """RAW_GRID description of the Cantor set of ``pair`` certified at eps.

    Encodes the eps/2 endpoint approximation on an eps/2 grid, so the decode
    is within eps/2 + eps/4 of the Cantor set.
    """
    n = approx_depth(pair, eps / 2)
    desc = encode_raw_grid(endpoint_set(pair, n), eps / 2)
    desc.eps = eps
    ref = endpoint_set(pair, n + REFERENCE_EXTRA_DEPTH)
    _certify_against(desc, ref, eps, pair.rho ** (n + REFERENCE_EXTRA_DEPTH))
    return desc


def _certify_against(desc: EncodedDescription, ref, eps: float, ref_error: float) -> None:
    dist = hausdorff(decode(desc), ref)
    desc.meta["reference_distance"] = dist
    desc.meta["reference_error"] = ref_error
    if not dist + ref_error <= eps:
        raise CertificationFailure(
            f"{desc.tag} decode is {dist:g} (+ reference error {ref_error:g}) from target (> {eps:g})", dist
        )


# ---------------------------------------------------------------------------
# IFS_POLY / IFS_ANALYTIC_NET


def _coeff_step_exponent(pair: IfsPair, eps: float) -> int:
    return dyadic_exponent(net_step(pair, eps))


def _write_pair(w: BitWriter, coeffs: list, k: int, depth: int) -> None:
    w.write_gamma0(k)
    w.write_gamma0(depth)
    w.write_gamma0(len(coeffs[0]) - 1)
    idx = [cell_index(c, k) for c in coeffs]
    allv = np.concatenate(idx)
    width = int_width(int(allv.min()), int(allv.max()))
    w.write_gamma0(width)
    for arr in idx:
        for v in arr:
            w.write_int(int(v), width)


def _read_pair(r: BitReader) -> tuple:
    k = r.read_gamma0()
    depth = r.read_gamma0()
    deg = r.read_gamma0()
    width = r.read_gamma0()
    maps = []
    for _ in range(2):
        idx = [r.read_int(width) for _ in range(deg + 1)]
        maps.append(IfsMap(tuple(cell_center(idx, k))))
    return maps, depth


def _decode_ifs(r: BitReader) -> np.ndarray:
    maps, depth = _read_pair(r)
    # class parameters are irrelevant to endpoint generation
    pair = IfsPair(maps[0], maps[1], 0.25, 0.45, 2.0, 0.6)
    return endpoint_set(pair, depth, max_depth=max(depth, 24))


def _encode_ifs(pair: IfsPair, eps: float, degree: int, tag: str) -> EncodedDescription:
    k = _coeff_step_exponent(pair, eps)
    coeffs = []
    for m in pair.maps:
        c = np.zeros(degree + 1)
        src = np.asarray(m.coeffs[: degree + 1])
        c[: src.size] = src
        coeffs.append(c)
    depth = approx_depth(pair, eps / 2)
    w = BitWriter()
    _write_pair(w, coeffs, k, depth)
    desc = EncodedDescription(tag, eps, w.bits(), {"k": k, "depth": depth, "degree": degree})
    ref_depth = depth + REFERENCE_EXTRA_DEPTH
    _certify_against(desc, endpoint_set(pair, ref_depth, max_depth=ref_depth), eps, pair.rho**ref_depth)
    return desc


def encode_ifs_poly(pair: IfsPair, eps: float) -> EncodedDescription:
    """Full-degree coefficients on a dyadic grid no coarser than eps (1 - rho)/16, plus depth."""
    return _encode_ifs(pair, eps, max(m.degree for m in pair.maps), IFS_POLY)


def encode_ifs_analytic(pair: IfsPair, eps: float) -> EncodedDescription:
    """Coefficients truncated at the net degree N(eps), quantized as for IFS_POLY."""
    return _encode_ifs(pair, eps, net_degree(pair, eps), IFS_ANALYTIC)


# ---------------------------------------------------------------------------
# MEASURE_ATOMIC


def _round_weights(weights, M: int) -> list:
    """Largest-remainder rounding of exact weights to integers summing to M."""
    scaled = [w * M for w in weights]
    base = [int(math.floor(s)) for s in scaled]
    short = M - sum(base)
    order = sorted(range(len(scaled)), key=lambda i: (-(scaled[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def encode_measure(mu: AtomicMeasure, eps: float) -> EncodedDescription:
    """Positions on a dyadic grid with step <= eps/2, weights in units of 2**-j.

    Position moves cost at most eps/4 in W1 for d <= 4 and the weight
    rounding at most diameter * (#atoms / 2**j) / 2 <= eps/4.
    """
    d = mu.dim
    k = dyadic_exponent(eps / 2)
    cells = cell_index(mu.positions, k)
    span = float(np.max(np.ptp(mu.positions, axis=0))) * math.sqrt(d) + 2.0**-k * math.sqrt(d)
    j = 0
    while span * len(mu) / 2.0 ** (j + 1) > eps / 4:
        j += 1
    M = 2**j
    units = _round_weights(mu.weights, M)
    keep = [i for i, u in enumerate(units) if u > 0]
    w = BitWriter()
    w.write_bit(0)
    w.write_gamma(d)
    w.write_gamma0(k)
    w.write_gamma0(j)
    _write_index_block(w, cells[keep])
    for i in keep:
        w.write_gamma(units[i])
    desc = EncodedDescription(MEASURE_ATOMIC, eps, w.bits(), {"k": k, "j": j, "atoms": len(keep)})
    nu = decode(desc)
    dist = kantorovich_1d(mu, nu) if d == 1 else kantorovich_lp(mu, nu, max_atoms=10**6)
    desc.meta["distance"] = dist
    if not dist <= eps:
        raise CertificationFailure(f"measure decode is {dist:g} from target (> {eps:g})", dist)
    return desc


def encode_lebesgue_comb(eps: float) -> EncodedDescription:
    """Lebesgue measure on [0, 1] via the uniform comb with n = ceil(1/(2 eps)) atoms."""
    n = math.ceil(1 / (2 * eps))
    w = BitWriter()
    w.write_bit(1)
    w.write_gamma(n)
    desc = EncodedDescription(MEASURE_ATOMIC, eps, w.bits(), {"comb": n})
    dist = kantorovich_to_uniform(decode(desc))
    desc.meta["distance"] = dist
    if not dist <= eps:
        raise CertificationFailure(f"comb is {dist:g} from Lebesgue (> {eps:g})", dist)
    return desc


def _decode_measure(r: BitReader) -> AtomicMeasure:
    if r.read_bit():
        n = r.read_gamma()
        return AtomicMeasure((np.arange(n) + 0.5) / n, [Fraction(1, n)] * n)
    d = r.read_gamma()
    k = r.read_gamma0()
    j = r.read_gamma0()
    cells = _read_index_block(r, d)
    units = [r.read_gamma() for _ in range(cells.shape[0])]
    if sum(units) != 2**j:
        raise DecodeError("weights do not sum to one")
    return AtomicMeasure(cell_center(cells, k), [Fraction(u, 2**j) for u in units])


# ---------------------------------------------------------------------------
# decoding


DECODERS: dict = {
    RAW_GRID: _decode_raw_grid,
    IFS_POLY: _decode_ifs,
    IFS_ANALYTIC: _decode_ifs,
    MEASURE_ATOMIC: _decode_measure,
}


def register_decoder(tag: str, fn: Callable) -> None:
    DECODERS[tag] = fn


def decode_stream(tag: str, reader: BitReader):
    """Decode one description from the reader, leaving it positioned after it."""
    if tag not in DECODERS and tag == HYP_JET:
        from . import hyperbolic  # noqa: F401  registers its decoder
    if tag not in DECODERS:
        raise DecodeError(f"unknown decoder tag {tag!r}")
    return DECODERS[tag](reader)


def decode(desc: EncodedDescription):
    r = desc.reader()
    out = decode_stream(desc.tag, r)
    if r.remaining():
        raise DecodeError(f"{r.remaining()} trailing bits")
    return out


# ---------------------------------------------------------------------------
# growth curves


def growth_rows(encoder: Callable, eps_values, workers: int | None = None) -> list:
    """(eps, bits, certified) rows for strictly decreasing eps."""
    eps_values = list(eps_values)
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    from .parallel import parallel_map

    descs = parallel_map(encoder, eps_values, workers=workers)
    return [(e, d.bit_len) for e, d in zip(eps_values, descs)]


def monotone_envelope(rows) -> list:
    """Replace bits(eps) by the minimum over finer eps' <= eps (a finer description is valid)."""
    rows = sorted(rows, key=lambda r: -r[0])
    out, best = [], math.inf
    for e, b in reversed(rows):
        best = min(best, b)
        out.append((e, best))
    return list(reversed(out))


@dataclass
class GrowthCurve:
    rows: list
    fits: dict
    preferred: str

    def to_json(self) -> dict:
        return {"rows": [list(r) for r in self.rows], "fits": self.fits, "preferred": self.preferred}


def _lstsq(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def _aic(rss: float, n: int, k: int) -> float:
    return n * math.log(max(rss / n, 1e-300)) + 2 * k


def fit_growth(rows) -> GrowthCurve:
    """Least-squares fits of bits against L = log2(1/eps).

    Candidate laws: ``linear`` a + b L, ``quadratic`` a + b L^2 and
    ``power`` a eps^-s ln(1/eps) (fitted in log space, scored in bit space).
    A full a + b L + c L^2 fit is reported as a diagnostic. The preferred
    law has the smallest AIC among the three candidates.
    """
    if len(rows) < 5:
        raise InsufficientRows(f"need >= 5 rows, got {len(rows)}")
    eps = np.array([r[0] for r in rows], dtype=float)
    bits = np.array([r[1] for r in rows], dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps must be strictly decreasing")
    L = np.log2(1 / eps)
    n = L.size
    one = np.ones(n)
    fits = {}
    a, b = _lstsq(np.column_stack([one, L]), bits)
    res = bits - (a + b * L)
    fits["linear"] = {"a": a, "b": b, "rss": float(res @ res)}
    a, b = _lstsq(np.column_stack([one, L**2]), bits)
    res = bits - (a + b * L**2)
    fits["quadratic"] = {"a": a, "b": b, "rss": float(res @ res)}
    lnE = np.log(1 / eps)
    la, s = _lstsq(np.column_stack([one, lnE]), np.log(bits / lnE))
    pred = math.exp(la) * np.exp(s * lnE) * lnE
    res = bits - pred
    fits["power"] = {"a": math.exp(la), "s": s, "rss": float(res @ res)}
    a, b, c = _lstsq(np.column_stack([one, L, L**2]), bits)
    res = bits - (a + b * L + c * L**2)
    fits["full_quadratic"] = {"a": a, "b": b, "c": c, "rss": float(res @ res)}
    for name in ("linear", "quadratic", "power"):
        fits[name]["aic"] = _aic(fits[name]["rss"], n, 2)
    fits["full_quadratic"]["aic"] = _aic(fits["full_quadratic"]["rss"], n, 3)
    tss = float(((bits - bits.mean()) ** 2).sum())
    for f in fits.values():
        f["r2"] = 1.0 - f["rss"] / tss if tss > 0 else 1.0
        for key, v in list(f.items()):
            f[key] = float(v)
    preferred = min(("linear", "quadratic", "power"), key=lambda m: fits[m]["aic"])
    return GrowthCurve([tuple(r) for r in rows], fits, preferred)
