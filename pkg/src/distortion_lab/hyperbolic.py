"""Approximating hyperbolic attractors: cover, lattice, push forward, certify.

Pipeline for a precision eps:

1. ``delta_exponent`` gives the minimal cover exponent; a margin above it
   is required (at the minimum the admissible range of m is empty).
2. ``choose_m`` picks the iterate count m.
3. ``cover_centers`` builds a greedy net of an orbit-oracle cloud.
4. ``lattice_pushforward`` lays a dyadic lattice of spacing
   <= eps * exp(-m lambda_plus) over eps^delta balls about the centres and
   pushes it through f^m, either exactly or through quantized Taylor jets.
5. ``hyp_description_length`` writes the jet run as a HYP_JET bitstring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .coding import BitReader, BitWriter, int_width
from .complexity import (
    HYP_JET,
    EncodedDescription,
    _read_index_block,
    _write_index_block,
    cell_index,
    decode,
    dyadic_exponent,
    register_decoder,
)
from .errors import (
    CertificationFailure,
    EscapeDetected,
    LatticeBudget,
    NoAdmissibleM,
    RateSignError,
)
from .metrics import hausdorff, nearest_distances, point_cloud

EXACT_MAP = "EXACT_MAP"
TAYLOR_JET = "TAYLOR_JET"
DEFAULT_LATTICE_CAP = 4_000_000
DEFAULT_MARGIN = 0.1


# ---------------------------------------------------------------------------
# truncated multivariate polynomials (jets)


@lru_cache(maxsize=None)
def monomials(d: int, order: int) -> tuple:
    """Exponent tuples of total degree <= order, by degree then reverse-lex."""
    out = []
    for deg in range(order + 1):
        for e in product(range(deg, -1, -1), repeat=d):
            if sum(e) == deg:
                out.append(e)
    return tuple(out)


@lru_cache(maxsize=None)
def _mul_table(d: int, order: int) -> tuple:
    mons = monomials(d, order)
    index = {m: i for i, m in enumerate(mons)}
    table = []
    for i, a in enumerate(mons):
        for j, b in enumerate(mons):
            s = tuple(x + y for x, y in zip(a, b))
            if sum(s) <= order:
                table.append((i, j, index[s]))
    return tuple(table)


def poly_mul(a: np.ndarray, b: np.ndarray, d: int, order: int) -> np.ndarray:
    """Truncated product of batched polynomials with shape (n, nmono)."""
    out = np.zeros_like(a)
    for i, j, k in _mul_table(d, order):
        out[:, k] += a[:, i] * b[:, j]
    return out


def compose(outer: np.ndarray, inner: np.ndarray, d: int, order: int) -> np.ndarray:
    """Jet of outer(inner(y)) where ``outer`` is expanded at inner(0).

    Shapes are (n, d, nmono); the constant term of ``inner`` is ignored.
    """
    mons = monomials(d, order)
    n = inner.shape[0]
    delta = inner.copy()
    delta[:, :, 0] = 0.0
    powers = {mons[0]: np.zeros((n, len(mons)))}
    powers[mons[0]][:, 0] = 1.0
    for m in mons[1:]:
        j = next(i for i, e in enumerate(m) if e)
        prev = tuple(e - (1 if i == j else 0) for i, e in enumerate(m))
        powers[m] = poly_mul(powers[prev], delta[:, j, :], d, order)
    out = np.zeros_like(inner)
    for a, m in enumerate(mons):
        out += outer[:, :, a][:, :, None] * powers[m][:, None, :]
    return out


def identity_jet(x: np.ndarray, order: int) -> np.ndarray:
    n, d = x.shape
    mons = monomials(d, order)
    out = np.zeros((n, d, len(mons)))
    out[:, :, 0] = x
    for j in range(d):
        if order >= 1:
            out[:, j, 1 + j] = 1.0
    return out


def evaluate_jet(coeffs: np.ndarray, offsets: np.ndarray, order: int) -> np.ndarray:
    """Evaluate one jet (d, nmono) at offset rows (p, d)."""
    d = offsets.shape[1]
    mons = monomials(d, order)
    out = np.zeros((offsets.shape[0], coeffs.shape[0]))
    for a, m in enumerate(mons):
        term = np.ones(offsets.shape[0])
        for j, e in enumerate(m):
            if e:
                term = term * offsets[:, j] ** e
        out += term[:, None] * coeffs[None, :, a]
    return out


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class HyperbolicSystem:
    """Map of a box in R^d with declared rates.

    ``branch`` labels the smooth piece used at each point, ``f_branch``
    applies a piece (on its natural extension, without wrapping angles) and
    ``jet`` returns Taylor coefficients of a piece up to a given order with
    shape (n, d, nmono). ``period`` marks angular coordinates.
    """

    name: str
    dim: int
    k: int
    lambda_plus: float
    lambda_minus: float
    box_lo: tuple
    box_hi: tuple
    branch: Callable
    f_branch: Callable
    jet: Callable
    period: tuple | None = None
    dimension: float | None = None

    def wrap(self, x: np.ndarray) -> np.ndarray:
        if self.period is None:
            return x
        x = x.copy()
        for j, p in enumerate(self.period):
            if p:
                x[:, j] = np.mod(x[:, j], p)
        return x

    def f(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.wrap(self.f_branch(x, self.branch(x)))

    def iterate(self, x: np.ndarray, m: int) -> np.ndarray:
        for _ in range(m):
            x = self.f(x)
        return x

    def inside(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        lo, hi = np.array(self.box_lo), np.array(self.box_hi)
        return np.all((x >= lo - tol) & (x <= hi + tol), axis=1)

    def metric_period(self):
        return None if self.period is None else list(self.period)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "k": self.k,
            "lambda_plus": self.lambda_plus,
            "lambda_minus": self.lambda_minus,
            "box_lo": list(self.box_lo),
            "box_hi": list(self.box_hi),
            "period": None if self.period is None else list(self.period),
        }


def _baker_branch(x):
    return np.minimum(np.floor(3.0 * x[:, 1]), 2.0).astype(np.int64)


def _baker_f(x, b):
    out = np.empty_like(x)
    out[:, 0] = (x[:, 0] + 2.0 * (b >= 1)) / 3.0
    out[:, 1] = 3.0 * x[:, 1] - b
    return out


def _baker_jet(x, order, b):
    n = x.shape[0]
    out = np.zeros((n, 2, len(monomials(2, order))))
    out[:, :, 0] = _baker_f(x, b)
    if order >= 1:
        out[:, 0, 1] = 1.0 / 3.0
        out[:, 1, 2] = 3.0
    return out


def skinny_baker(**overrides) -> HyperbolicSystem:
    """Three horizontal strips; x contracts by 3 into the outer thirds, y expands by 3.

    Attractor: (middle-thirds Cantor set) x [0, 1].
    """
    sys = HyperbolicSystem(
        "skinny_baker", 2, 2, math.log(3), -math.log(3), (0.0, 0.0), (1.0, 1.0),
        _baker_branch, _baker_f, _baker_jet, None, 1 + math.log(2) / math.log(3),
    )
    return replace(sys, **overrides) if overrides else sys


TWO_PI = 2 * math.pi


def _sol_branch(x):
    return np.zeros(x.shape[0], dtype=np.int64)


def _sol_f(x, b):
    th = x[:, 0]
    return np.column_stack([2 * th, x[:, 1] / 4 + 0.5 * np.cos(th), x[:, 2] / 4 + 0.5 * np.sin(th)])


def _sol_jet(x, order, b):
    n = x.shape[0]
    mons = monomials(3, order)
    out = np.zeros((n, 3, len(mons)))
    out[:, :, 0] = _sol_f(x, b)
    th = x[:, 0]
    # derivatives of cos and sin cycle with period 4
    cos_d = [np.cos(th), -np.sin(th), -np.cos(th), np.sin(th)]
    sin_d = [np.sin(th), np.cos(th), -np.sin(th), -np.cos(th)]
    for a, m in enumerate(mons):
        if a == 0:
            continue
        if m == (1, 0, 0):
            out[:, 0, a] = 2.0
        if m == (0, 1, 0):
            out[:, 1, a] = 0.25
        if m == (0, 0, 1):
            out[:, 2, a] = 0.25
        if m[1] == 0 and m[2] == 0:
            r = m[0]
            out[:, 1, a] += 0.5 * cos_d[r % 4] / math.factorial(r)
            out[:, 2, a] += 0.5 * sin_d[r % 4] / math.factorial(r)
    return out


def solenoid(**overrides) -> HyperbolicSystem:
    """Angle doubling with fibre contraction 1/4 in (theta, u, v)."""
    sys = HyperbolicSystem(
        "solenoid", 3, 2, math.log(2) + 0.05, -math.log(4), (0.0, -1.0, -1.0), (TWO_PI, 1.0, 1.0),
        _sol_branch, _sol_f, _sol_jet, (TWO_PI, None, None), 1.5,
    )
    return replace(sys, **overrides) if overrides else sys


SYSTEMS = {"skinny_baker": skinny_baker, "solenoid": solenoid}


def get_system(name: str, **overrides) -> HyperbolicSystem:
    if name not in SYSTEMS:
        raise KeyError(f"unknown system {name!r}; known: {sorted(SYSTEMS)}")
    allowed = {"k", "lambda_plus", "lambda_minus"}
    bad = set(overrides) - allowed
    if bad:
        raise KeyError(f"cannot override {sorted(bad)}")
    return SYSTEMS[name](**overrides)


# ---------------------------------------------------------------------------
# exponents and m


def delta_exponent(lambda_plus: float, lambda_minus: float, k: int) -> float:
    """(lambda_plus - lambda_minus / k) / (lambda_plus - lambda_minus)."""
    if not lambda_plus > 0 or lambda_minus > 0 or k < 1:
        raise RateSignError("need lambda_minus <= 0 < lambda_plus and k >= 1")
    if lambda_minus == 0:
        return 1.0
    return (lambda_plus - lambda_minus / k) / (lambda_plus - lambda_minus)


def delta_with_margin(system: HyperbolicSystem, margin: float = DEFAULT_MARGIN) -> float:
    return min(1.0, delta_exponent(system.lambda_plus, system.lambda_minus, system.k) * (1 + margin))


def m_interval(eps: float, system: HyperbolicSystem, delta: float) -> tuple:
    """Open interval (a, b) of real m satisfying both iterate conditions."""
    L = math.log(1 / eps)
    k = system.k
    a = (1 - delta) * L / abs(system.lambda_minus)
    b = (k * delta - 1) * L / (k * system.lambda_plus)
    return a, b


def m_conditions(eps: float, system: HyperbolicSystem, delta: float, m: int) -> tuple:
    """(exp(m k lp) eps^(k delta) < eps, exp(m lm) eps^delta < eps), checked in log space."""
    k, lp, lm = system.k, system.lambda_plus, system.lambda_minus
    le = math.log(eps)
    return (m * k * lp + k * delta * le < le, m * lm + delta * le < le)


def choose_m(eps: float, system: HyperbolicSystem, delta: float) -> int:
    """Smallest integer m >= 1 satisfying both conditions."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    a, b = m_interval(eps, system, delta)
    m = max(1, math.floor(a) + 1)
    if not m < b or not all(m_conditions(eps, system, delta, m)):
        raise NoAdmissibleM(a, b)
    return m


# ---------------------------------------------------------------------------
# oracle, cover, dimension


@dataclass
class OracleCloud:
    points: np.ndarray
    resolution: float
    seed: int
    burn_in: int


def orbit_oracle(system: HyperbolicSystem, burn_in: int = 1000, samples: int = 100_000, seed: int = 0) -> OracleCloud:
    """Seeded orbit of one start point, recorded after ``burn_in`` steps."""
    rng = np.random.default_rng(seed)
    lo, hi = np.array(system.box_lo), np.array(system.box_hi)
    x = (lo + (hi - lo) * rng.random(system.dim))[None, :]
    out = np.empty((samples, system.dim))
    for t in range(burn_in + samples):
        x = system.f(x)
        if not system.inside(x)[0]:
            raise EscapeDetected(f"iterate {t} left the trapping region: {x[0].tolist()}")
        if t >= burn_in:
            out[t - burn_in] = x[0]
    return OracleCloud(out, oracle_resolution(out, system.metric_period()), seed, burn_in)


def oracle_resolution(points: np.ndarray, period=None) -> float:
    """Largest nearest-neighbour spacing in the cloud."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] < 2:
        return 0.0
    box = None
    if period is not None:
        box = np.array([0.0 if p is None else float(p) for p in period])
        pts = pts.copy()
        for j, p in enumerate(box):
            if p:
                pts[:, j] %= p
    dist, _ = cKDTree(pts, boxsize=box).query(pts, k=2)
    return float(dist[:, 1].max())


def cover_centers(cloud, radius: float, period=None) -> np.ndarray:
    """Greedy radius-net in input order: a point becomes a centre when no centre covers it."""
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("cloud is empty")
    box = None
    data = pts
    if period is not None:
        box = np.array([0.0 if p is None else float(p) for p in period])
        data = pts.copy()
        for j, p in enumerate(box):
            if p:
                data[:, j] %= p
    tree = cKDTree(data, boxsize=box)
    covered = np.zeros(pts.shape[0], dtype=bool)
    centers = []
    for i in range(pts.shape[0]):
        if covered[i]:
            continue
        centers.append(i)
        covered[tree.query_ball_point(data[i], radius)] = True
    return pts[centers]


def box_count_dimension(cloud, scales=range(2, 8), period=None) -> tuple:
    """Slope of log2(occupied dyadic cells) against the scale exponent."""
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    s_list = list(scales)
    counts = []
    for s in s_list:
        x = pts.copy()
        if period is not None:
            for j, p in enumerate(period):
                if p:
                    # rescale angles to [0, 1) so dyadic cells tile the circle
                    x[:, j] = np.mod(x[:, j], p) / p
        counts.append(np.unique(np.floor(np.ldexp(x, s)), axis=0).shape[0])
    slope, _ = np.polyfit(s_list, np.log2(counts), 1)
    return float(slope), counts


# ---------------------------------------------------------------------------
# lattice pushforward


@dataclass
class LatticePlan:
    eps: float
    delta: float
    m: int
    j: int
    c: int
    q: int
    R2: int
    order: int
    centers: np.ndarray
    center_cells: np.ndarray

    @property
    def h(self) -> float:
        return 2.0**-self.j


@dataclass
class PushforwardResult:
    points: np.ndarray
    plan: LatticePlan
    mode: str
    lattice_points: int
    groups: list = field(default_factory=list)
    remainder_bound: float = 0.0
    meta: dict = field(default_factory=dict)


@lru_cache(maxsize=64)
def _ball_offsets(d: int, R2: int) -> np.ndarray:
    r = math.isqrt(R2)
    axis = np.arange(-r, r + 1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return grid[(grid**2).sum(axis=1) <= R2]


def plan_lattice(system, oracle_points, eps, m, delta, period=None) -> LatticePlan:
    """Fix the lattice, the centre grid and the jet quantization for one run."""
    order = system.k - 1
    nmono = len(monomials(system.dim, order))
    radius = eps**delta
    j = dyadic_exponent(eps * math.exp(-m * system.lambda_plus))
    c = min(dyadic_exponent(radius / 4), j - 1)
    q = dyadic_exponent(eps / (8 * nmono))
    R2 = math.floor((radius * 2.0**j) ** 2)
    net = cover_centers(oracle_points, radius / 2, period=period)
    cells = np.unique(cell_index(net, c), axis=0)
    centers = (cells + 0.5) * 2.0**-c
    return LatticePlan(eps, delta, m, j, c, q, R2, order, centers, cells)


def _center_lattice(plan: LatticePlan) -> np.ndarray:
    # (i + 1/2) 2^-c in units of 2^-j is an integer because j > c
    return (2 * plan.center_cells + 1) * 2 ** (plan.j - plan.c - 1)


def _trap_mask(system, pts_lat: np.ndarray, j: int) -> np.ndarray:
    x = np.ldexp(pts_lat.astype(float), -j)
    lo, hi = np.array(system.box_lo), np.array(system.box_hi)
    ok = np.ones(x.shape[0], dtype=bool)
    for a in range(system.dim):
        if system.period is not None and system.period[a]:
            continue
        ok &= (x[:, a] >= lo[a]) & (x[:, a] <= hi[a])
    return ok


def lattice_pushforward(
    system: HyperbolicSystem,
    centers_or_plan,
    eps: float | None = None,
    m: int | None = None,
    delta: float | None = None,
    mode: str = EXACT_MAP,
    lattice_cap: int = DEFAULT_LATTICE_CAP,
    quantize: bool = True,
) -> PushforwardResult:
    """Push the lattice around every centre through f^m.

    ``centers_or_plan`` is either a :class:`LatticePlan` or an oracle cloud
    from which a plan is built with ``eps``, ``m`` and ``delta``.
    """
    if isinstance(centers_or_plan, LatticePlan):
        plan = centers_or_plan
    else:
        plan = plan_lattice(system, centers_or_plan, eps, m, delta, system.metric_period())
    if mode not in (EXACT_MAP, TAYLOR_JET):
        raise ValueError(f"unknown mode {mode!r}")
    offsets = _ball_offsets(system.dim, plan.R2)
    estimate = offsets.shape[0] * plan.centers.shape[0]
    if estimate > lattice_cap:
        raise LatticeBudget(
            f"{estimate} lattice points ({plan.centers.shape[0]} centres x {offsets.shape[0]}) exceed cap {lattice_cap}"
        )
    cl = _center_lattice(plan)
    remainder = remainder_scale(system, plan)
    if mode == EXACT_MAP:
        lat = (cl[:, None, :] + offsets[None, :, :]).reshape(-1, system.dim)
        lat = lat[_trap_mask(system, lat, plan.j)]
        lat = np.unique(lat, axis=0)
        pts = system.iterate(np.ldexp(lat.astype(float), -plan.j), plan.m)
        return PushforwardResult(point_cloud(pts), plan, mode, lat.shape[0], [], remainder)

    groups = _jet_groups(system, plan, cl, offsets, quantize)
    pts = _evaluate_groups(system.dim, plan, groups, offsets, _period_of(system))
    n_lat = sum(g["count"] for g in groups)
    res = PushforwardResult(pts, plan, mode, n_lat, groups, remainder)
    res.meta["quantized"] = quantize
    return res


def _period_of(system) -> list:
    return [p if p else 0.0 for p in system.period] if system.period is not None else [0.0] * system.dim


def _jet_groups(system, plan, cl, offsets, quantize) -> list:
    """One jet per (centre, itinerary of f^m) with the box of its lattice offsets."""
    d, j = system.dim, plan.j
    entries = []
    for ci in range(cl.shape[0]):
        lat = cl[ci] + offsets
        mask = _trap_mask(system, lat, j)
        offs = offsets[mask]
        if offs.shape[0] == 0:
            continue
        x = np.ldexp((cl[ci] + offs).astype(float), -j)
        itin = np.empty((offs.shape[0], plan.m), dtype=np.int64)
        for t in range(plan.m):
            b = system.branch(x)
            itin[:, t] = b
            x = system.wrap(system.f_branch(x, b))
        codes, inverse = np.unique(itin, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        for g, code in enumerate(codes):
            sel = offs[inverse == g]
            lo, hi = sel.min(axis=0), sel.max(axis=0)
            in_box = np.all((offsets >= lo) & (offsets <= hi), axis=1)
            if int(in_box.sum()) != sel.shape[0]:
                raise CertificationFailure(
                    f"itinerary region at centre {ci} is not box-shaped on the lattice"
                )
            entries.append({"center": ci, "itinerary": code, "lo": lo, "hi": hi, "count": sel.shape[0]})
    if not entries:
        return []
    X = np.ldexp(cl[[e["center"] for e in entries]].astype(float), -j)
    itins = np.array([e["itinerary"] for e in entries])
    P = identity_jet(X, plan.order)
    for t in range(plan.m):
        G = system.jet(P[:, :, 0], plan.order, itins[:, t])
        P = compose(G, P, d, plan.order)
    if quantize:
        ints = np.floor(np.ldexp(P, plan.q)).astype(np.int64)
    for e, i in zip(entries, range(len(entries))):
        if quantize:
            e["jet_int"] = ints[i]
            e["jet"] = np.ldexp(ints[i].astype(float) + 0.5, -plan.q)
        else:
            e["jet"] = P[i]
    return entries


def _evaluate_groups(d, plan, groups, offsets, period) -> np.ndarray:
    chunks = []
    for g in groups:
        in_box = np.all((offsets >= g["lo"]) & (offsets <= g["hi"]), axis=1)
        off = np.ldexp(offsets[in_box].astype(float), -plan.j)
        y = evaluate_jet(g["jet"], off, plan.order)
        for a, p in enumerate(period):
            if p:
                y[:, a] = np.mod(y[:, a], p)
        chunks.append(y)
    if not chunks:
        raise CertificationFailure("no lattice points inside the trapping region")
    return point_cloud(np.concatenate(chunks))


def jet_exact_gap(system, plan: LatticePlan, quantize: bool = False, max_centers: int | None = None) -> float:
    """Largest per-lattice-point distance between the jet value and f^m."""
    sub = plan
    if max_centers is not None and plan.center_cells.shape[0] > max_centers:
        sub = replace(plan, center_cells=plan.center_cells[:max_centers], centers=plan.centers[:max_centers])
    offsets = _ball_offsets(system.dim, sub.R2)
    cl = _center_lattice(sub)
    groups = _jet_groups(system, sub, cl, offsets, quantize)
    per = _period_of(system)
    worst = 0.0
    for g in groups:
        in_box = np.all((offsets >= g["lo"]) & (offsets <= g["hi"]), axis=1)
        off = offsets[in_box]
        y_jet = evaluate_jet(g["jet"], np.ldexp(off.astype(float), -sub.j), sub.order)
        y_map = system.iterate(np.ldexp((cl[g["center"]] + off).astype(float), -sub.j), sub.m)
        diff = np.abs(y_jet - y_map)
        for a, p in enumerate(per):
            if p:
                diff[:, a] = np.mod(diff[:, a], p)
                diff[:, a] = np.minimum(diff[:, a], p - diff[:, a])
        worst = max(worst, float(np.sqrt((diff**2).sum(axis=1)).max()))
    return worst


def remainder_scale(system, plan: LatticePlan) -> float:
    """radius^k m^k exp(m k lambda_plus)."""
    k = system.k
    return (plan.eps**plan.delta) ** k * plan.m**k * math.exp(plan.m * k * system.lambda_plus)


# ---------------------------------------------------------------------------
# certification


@dataclass
class HyperCertificate:
    eps: float
    distance: float
    resolution: float
    tolerance: float
    certified: bool

    def to_json(self) -> dict:
        return {"eps": self.eps, "distance": self.distance, "resolution": self.resolution,
                "tolerance": self.tolerance, "certified": self.certified}


def certify_run(system, result: PushforwardResult, oracle: OracleCloud) -> HyperCertificate:
    """d_H(output, oracle) <= 2 eps + oracle resolution."""
    dist = hausdorff(result.points, oracle.points, period=system.metric_period())
    tol = 2 * result.plan.eps + oracle.resolution
    return HyperCertificate(result.plan.eps, dist, oracle.resolution, tol, dist <= tol)


def validate_system(system, oracle: OracleCloud, probes: int = 2000, seed: int = 0, h: float = 1e-7) -> dict:
    """Sampled checks of the declared rates against the oracle."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(oracle.points.shape[0], size=min(probes, oracle.points.shape[0]), replace=False)
    x = oracle.points[idx]
    # finite-difference Jacobian of the local piece
    b = system.branch(x)
    J = np.empty((x.shape[0], system.dim, system.dim))
    for a in range(system.dim):
        e = np.zeros(system.dim)
        e[a] = h
        J[:, :, a] = (system.f_branch(x + e, b) - system.f_branch(x - e, b)) / (2 * h)
    norm = float(np.linalg.norm(J, ord=2, axis=(1, 2)).max())
    scale = 4 * oracle.resolution
    y = x + scale * rng.uniform(-1, 1, size=x.shape)
    y = y[system.inside(system.wrap(y), tol=0.0)]
    per = system.metric_period()
    dy = nearest_distances(y, oracle.points, per)
    dfy = nearest_distances(system.f(y), oracle.points, per)
    excess = dfy - (math.exp(system.lambda_minus) * dy + 2 * oracle.resolution)
    return {
        "sup_norm_sampled": norm,
        "sup_norm_bound": math.exp(system.lambda_plus),
        "norm_ok": norm <= math.exp(system.lambda_plus) * (1 + 1e-6),
        "contraction_max_excess": float(excess.max()) if excess.size else 0.0,
        "contraction_ok": bool(np.all(excess <= 0)),
        "probes": int(y.shape[0]),
    }


# ---------------------------------------------------------------------------
# HYP_JET encoding


def hyp_description_length(system, eps: float, result: PushforwardResult) -> EncodedDescription:
    """Bitstring for a quantized TAYLOR_JET run; its decode must equal the run output."""
    if result.mode != TAYLOR_JET or not result.meta.get("quantized", False):
        raise ValueError("needs a quantized TAYLOR_JET run")
    plan = result.plan
    d = system.dim
    w = BitWriter()
    w.write_gamma(d)
    w.write_gamma(system.k)
    w.write_gamma(plan.m)
    w.write_gamma0(plan.j)
    w.write_gamma0(plan.c)
    w.write_gamma0(plan.q)
    w.write_gamma0(plan.R2)
    for p in _period_of(system):
        if p:
            w.write_bit(1)
            w.write_uint(int(np.float64(p).view(np.uint64)), 64)
        else:
            w.write_bit(0)
    _write_index_block(w, plan.center_cells)
    groups = result.groups
    per_center = np.bincount([g["center"] for g in groups], minlength=plan.center_cells.shape[0])
    box = np.array([np.concatenate([g["lo"], g["hi"]]) for g in groups])
    jets = np.array([g["jet_int"].ravel() for g in groups])
    box_w = int_width(int(box.min()), int(box.max()))
    jet_w = [int_width(int(jets[:, i].min()), int(jets[:, i].max())) for i in range(jets.shape[1])]
    w.write_gamma0(box_w)
    for wd in jet_w:
        w.write_gamma0(wd)
    gi = 0
    for ci in range(plan.center_cells.shape[0]):
        w.write_gamma0(int(per_center[ci]))
        for _ in range(per_center[ci]):
            for v in box[gi]:
                w.write_int(int(v), box_w)
            for v, wd in zip(jets[gi], jet_w):
                w.write_int(int(v), wd)
            gi += 1
    desc = EncodedDescription(
        HYP_JET, eps, w.bits(),
        {"centers": int(plan.center_cells.shape[0]), "groups": len(groups), "m": plan.m, "delta": plan.delta},
    )
    decoded = decode(desc)
    if decoded.shape != result.points.shape or not np.array_equal(decoded, result.points):
        dist = hausdorff(decoded, result.points)
        raise CertificationFailure(f"decoded cloud drifts {dist:g} from the run output", dist)
    return desc


def _decode_hyp(r: BitReader) -> np.ndarray:
    d = r.read_gamma()
    k = r.read_gamma()
    m = r.read_gamma()
    j = r.read_gamma0()
    c = r.read_gamma0()
    q = r.read_gamma0()
    R2 = r.read_gamma0()
    period = []
    for _ in range(d):
        period.append(float(np.uint64(r.read_uint(64)).view(np.float64)) if r.read_bit() else 0.0)
    cells = _read_index_block(r, d)
    order = k - 1
    nmono = len(monomials(d, order))
    box_w = r.read_gamma0()
    jet_w = [r.read_gamma0() for _ in range(d * nmono)]
    groups = []
    for ci in range(cells.shape[0]):
        for _ in range(r.read_gamma0()):
            bx = np.array([r.read_int(box_w) for _ in range(2 * d)], dtype=np.int64)
            ints = np.array([r.read_int(wd) for wd in jet_w], dtype=np.int64).reshape(d, nmono)
            groups.append({"center": ci, "lo": bx[:d], "hi": bx[d:],
                           "jet": np.ldexp(ints.astype(float) + 0.5, -q)})
    plan = LatticePlan(0.0, 0.0, m, j, c, q, R2, order, np.empty((0, d)), cells)
    return _evaluate_groups(d, plan, groups, _ball_offsets(d, R2), period)


register_decoder(HYP_JET, _decode_hyp)


# ---------------------------------------------------------------------------
# end-to-end


@dataclass
class HyperRun:
    system: HyperbolicSystem
    eps: float
    delta: float
    m: int
    oracle: OracleCloud
    result: PushforwardResult
    certificate: HyperCertificate
    description: EncodedDescription | None = None


def run_pipeline(
    system: HyperbolicSystem,
    eps: float,
    oracle: OracleCloud,
    margin: float = DEFAULT_MARGIN,
    mode: str = TAYLOR_JET,
    lattice_cap: int = DEFAULT_LATTICE_CAP,
    describe: bool = True,
) -> HyperRun:
    delta = delta_with_margin(system, margin)
    m = choose_m(eps, system, delta)
    plan = plan_lattice(system, oracle.points, eps, m, delta, system.metric_period())
    result = lattice_pushforward(system, plan, mode=mode, lattice_cap=lattice_cap)
    cert = certify_run(system, result, oracle)
    desc = hyp_description_length(system, eps, result) if describe and mode == TAYLOR_JET else None
    return HyperRun(system, eps, delta, m, oracle, result, cert, desc)
