"""Hausdorff and Kantorovich distances between finite approximations, and
the hole-based separation certificate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .ifs_core import _images
from .errors import DimensionError, EmptyCloud, HoleViolation, SupportTooLarge

DUP_TOL = 1e-13
LP_MAX_ATOMS = 64
CERTIFIED = "CERTIFIED-SEPARATED"
INCONCLUSIVE = "INCONCLUSIVE"


def point_cloud(points, tol: float = DUP_TOL) -> np.ndarray:
    """Canonical cloud: 1-d sorted unique array or (n, d) lexicographically sorted rows."""
    a = np.asarray(points, dtype=float)
    if a.size == 0:
        raise EmptyCloud("point cloud is empty")
    if a.ndim == 2 and a.shape[1] == 1:
        a = a[:, 0]
    if a.ndim == 1:
        a = np.sort(a)
        keep = np.concatenate([[True], np.diff(a) > tol])
        return a[keep]
    order = np.lexsort(a.T[::-1])
    a = a[order]
    keep = np.concatenate([[True], np.any(np.abs(np.diff(a, axis=0)) > tol, axis=1)])
    return a[keep]


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise EmptyCloud("point cloud is empty")
    return a[:, None] if a.ndim == 1 else a


def directed_hausdorff_1d(A, B) -> float:
    """sup_{a in A} d(a, B) for 1-d clouds; B need not be sorted."""
    b = np.sort(np.asarray(B, dtype=float).ravel())
    a = np.asarray(A, dtype=float).ravel()
    idx = np.searchsorted(b, a)
    right = b[np.minimum(idx, b.size - 1)]
    left = b[np.maximum(idx - 1, 0)]
    return float(np.max(np.minimum(np.abs(a - left), np.abs(right - a))))


def nearest_distances(A, B, period=None) -> np.ndarray:
    """Distance from every point of A to the cloud B."""
    a, b = _as_2d(A), _as_2d(B)
    if a.shape[1] != b.shape[1]:
        raise DimensionError("clouds have different dimensions")
    if period is None and a.shape[1] == 1:
        bs = np.sort(b[:, 0])
        idx = np.searchsorted(bs, a[:, 0])
        right = bs[np.minimum(idx, bs.size - 1)]
        left = bs[np.maximum(idx - 1, 0)]
        return np.minimum(np.abs(a[:, 0] - left), np.abs(right - a[:, 0]))
    box = None
    if period is not None:
        box = np.array([0.0 if p is None else float(p) for p in period])
        a, b = a.copy(), b.copy()
        for j, p in enumerate(box):
            if p > 0:
                a[:, j] %= p
                b[:, j] %= p
    return cKDTree(b, boxsize=box).query(a, k=1)[0]


def hausdorff(A, B, period=None) -> float:
    """Hausdorff distance between finite clouds.

    ``period`` optionally gives, per coordinate, a period (or None) so that
    angular coordinates are measured on the circle.
    """
    if np.asarray(A).size == 0 or np.asarray(B).size == 0:
        raise EmptyCloud("hausdorff needs two nonempty clouds")
    return float(max(nearest_distances(A, B, period).max(), nearest_distances(B, A, period).max()))


# ---------------------------------------------------------------------------
# hole certificate


@dataclass(frozen=True)
class Hole:
    """Gap (c, d) of a compact set F: c, d in F and F avoids the open interval."""

    c: object
    d: object
    owner: str = ""

    def __post_init__(self):
        if not self.c < self.d:
            raise HoleViolation(f"hole needs c < d, got [{self.c}, {self.d}]")

    @property
    def width(self):
        return self.d - self.c


def check_hole(cloud, hole: Hole, tol: float = DUP_TOL) -> None:
    pts = np.asarray(cloud, dtype=float).ravel()
    c, d = float(hole.c), float(hole.d)
    for e in (c, d):
        if pts.size == 0 or np.min(np.abs(pts - e)) > tol:
            raise HoleViolation(f"hole endpoint {e!r} is not a point of {hole.owner or 'the cloud'}")
    inside = pts[(pts > c + tol) & (pts < d - tol)]
    if inside.size:
        raise HoleViolation(f"point {inside[0]!r} lies inside the hole [{c!r}, {d!r}]")


@dataclass(frozen=True)
class Certificate:
    status: str
    widths_ok: bool
    displacement_ok: bool
    witness_depth: object
    eps: object

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "widths_ok": self.widths_ok,
            "displacement_ok": self.displacement_ok,
            "witness_depth": float(self.witness_depth),
            "eps": float(self.eps),
        }


def _depth(e, c, d):
    # how far e sits inside (c, d); <= 0 when outside
    return min(e - c, d - e)


def hole_certificate(c, d, c2, d2, eps) -> Certificate:
    """Decide the certificate from hole endpoints alone.

    Works for floats and for exact types (Fraction, int) alike, so that
    displacements measured in units of a tiny eps are decided exactly.

    The three width/displacement inequalities are necessary for the
    certificate but not sufficient on their own: holes [0.1, 0.9] and
    [0.85, 0.99] with eps = 0.06 satisfy all three while the sets
    {0.1, 0.9, 0.99} and {0.1, 0.85, 0.99} are only 0.05 apart. We therefore
    also require a witness: an endpoint of one hole lying more than eps deep
    inside the other hole. Such an endpoint is a point of its own set at
    distance > eps from the other set, which proves the separation.
    """
    widths_ok = (d - c) > 2 * eps and (d2 - c2) > 2 * eps
    displacement_ok = max(abs(c - c2), abs(d - d2)) > eps
    depth = max(_depth(c, c2, d2), _depth(d, c2, d2), _depth(c2, c, d), _depth(d2, c, d))
    ok = widths_ok and displacement_ok and depth > eps
    return Certificate(CERTIFIED if ok else INCONCLUSIVE, widths_ok, displacement_ok, depth, eps)


def separation_certificate(A, holeA: Hole, B, holeB: Hole, eps) -> Certificate:
    """Sufficient test for hausdorff(A, B) > eps; never reports 'not separated'."""
    check_hole(A, holeA)
    check_hole(B, holeB)
    return hole_certificate(holeA.c, holeA.d, holeB.c, holeB.d, eps)


# ---------------------------------------------------------------------------
# atomic measures


def _frac(w) -> Fraction:
    # floats convert exactly; strings may be "p/q"
    return Fraction(w)


class AtomicMeasure:
    """Finitely many atoms with exact rational weights summing to one.

    Atoms at equal positions are merged; positions are kept sorted.
    """

    def __init__(self, positions, weights: Sequence):
        x = np.asarray(positions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        w = [_frac(v) for v in weights]
        if x.shape[0] != len(w):
            raise ValueError("positions and weights differ in length")
        if not w:
            raise EmptyCloud("measure has no atoms")
        if any(v <= 0 for v in w):
            raise ValueError("weights must be positive")
        if sum(w, Fraction(0)) != 1:
            raise ValueError("weights must sum to exactly 1")
        order = np.lexsort(x.T[::-1])
        x = x[order]
        w = [w[i] for i in order]
        keep_x, keep_w = [x[0]], [w[0]]
        for xi, wi in zip(x[1:], w[1:]):
            if np.array_equal(xi, keep_x[-1]):
                keep_w[-1] += wi
            else:
                keep_x.append(xi)
                keep_w.append(wi)
        self.positions = np.array(keep_x)
        self.weights = tuple(keep_w)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return len(self.weights)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AtomicMeasure)
            and self.weights == other.weights
            and np.array_equal(self.positions, other.positions)
        )

    def integer_weights(self, denom: int | None = None):
        """(integer weights, common denominator)."""
        L = denom or reduce(math.lcm, (w.denominator for w in self.weights), 1)
        return [w.numerator * (L // w.denominator) for w in self.weights], L

    def float_weights(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def to_json(self) -> dict:
        return {
            "atoms": [
                {"x": [float(v) for v in p], "w": f"{w.numerator}/{w.denominator}"}
                for p, w in zip(self.positions, self.weights)
            ]
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AtomicMeasure":
        atoms = obj["atoms"]
        return cls([a["x"] for a in atoms], [Fraction(a["w"]) for a in atoms])

    @classmethod
    def dirac(cls, x) -> "AtomicMeasure":
        return cls([np.atleast_1d(np.asarray(x, dtype=float))], [1])

    @classmethod
    def uniform(cls, positions) -> "AtomicMeasure":
        n = len(positions)
        return cls(positions, [Fraction(1, n)] * n)


def kantorovich_1d(mu: AtomicMeasure, nu: AtomicMeasure) -> float:
    """W1 = integral of |F_mu - F_nu| computed by a sweep over the merged support.

    CDF differences are exact integers over a common denominator; only the
    final weighted sum of gaps is rounded.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise DimensionError("kantorovich_1d needs measures on the line")
    L = math.lcm(*(w.denominator for w in mu.weights + nu.weights))
    wm, _ = mu.integer_weights(L)
    wn, _ = nu.integer_weights(L)
    xs = np.concatenate([mu.positions[:, 0], nu.positions[:, 0]])
    ws = wm + [-v for v in wn]
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    terms = []
    cdf = 0
    for i in range(len(order) - 1):
        cdf += ws[order[i]]
        gap = xs[i + 1] - xs[i]
        if cdf and gap:
            terms.append(abs(cdf) * gap)
    return math.fsum(terms) / L


def kantorovich_to_uniform(mu: AtomicMeasure) -> float:
    """W1 between mu (on [0, 1]) and Lebesgue measure on [0, 1]."""
    if mu.dim != 1:
        raise DimensionError("needs a measure on the line")
    x = mu.positions[:, 0]
    if x[0] < 0 or x[-1] > 1:
        raise ValueError("atoms must lie in [0, 1]")
    edges = np.concatenate([[0.0], x, [1.0]])
    cum = np.concatenate([[0.0], np.cumsum([float(w) for w in mu.weights])])
    total = []
    for (a, b), F in zip(zip(edges[:-1], edges[1:]), cum):
        # integral over [a, b] of |F - t| dt for constant F
        if F <= a or F >= b:
            total.append(abs((b - a) * (F - (a + b) / 2)))
        else:
            total.append(((F - a) ** 2 + (b - F) ** 2) / 2)
    return math.fsum(total)


def kantorovich_lp(mu: AtomicMeasure, nu: AtomicMeasure, max_atoms: int = LP_MAX_ATOMS) -> float:
    """W1 in any dimension as a min-cost flow on the bipartite support graph.

    Supplies are integers over the common denominator; Euclidean costs are
    scaled by 2**40 and rounded for the solver, and the returned value is
    recomputed from the optimal flows with unrounded costs.
    """
    if mu.dim != nu.dim:
        raise DimensionError("measures live in different dimensions")
    if len(mu) + len(nu) > max_atoms:
        raise SupportTooLarge(f"combined support {len(mu) + len(nu)} exceeds {max_atoms}")
    L = math.lcm(*(w.denominator for w in mu.weights + nu.weights))
    wm, _ = mu.integer_weights(L)
    wn, _ = nu.integer_weights(L)
    cost = np.sqrt(((mu.positions[:, None, :] - nu.positions[None, :, :]) ** 2).sum(axis=2))
    G = nx.DiGraph()
    for i, w in enumerate(wm):
        G.add_node(("s", i), demand=-w)
    for j, w in enumerate(wn):
        G.add_node(("t", j), demand=w)
    for i in range(len(wm)):
        for j in range(len(wn)):
            G.add_edge(("s", i), ("t", j), weight=int(round(cost[i, j] * 2.0**40)))
    flow = nx.min_cost_flow(G)
    terms = [
        f * cost[i, j]
        for i in range(len(wm))
        for j, f in ((k[1], v) for k, v in flow[("s", i)].items())
        if f
    ]
    return math.fsum(terms) / L


def bernoulli_measure(pair, n: int) -> AtomicMeasure:
    """Level-n uniform Bernoulli approximation: mass 2**-n at each phi_w(0)."""
    if n < 1:
        raise ValueError("depth must be >= 1")
    x = _images(pair.maps, np.array([0.0]), n)
    return AtomicMeasure(x, [Fraction(1, 2**n)] * x.size)
