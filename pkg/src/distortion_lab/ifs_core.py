"""Two-map injective hyperbolic IFS on [0, 1].

Maps are polynomials in the centred variable ``t = x - 1/2``; analytic maps
enter as truncations of their power series at 1/2.

Word convention
---------------
A word ``w = (w_0, ..., w_{n-1})`` is evaluated by default with the *last*
symbol innermost::

    word_map(pair, w, x) == phi[w_0](phi[w_1](... phi[w_{n-1}](x)))

This is the ordering under which the set of new level-n endpoints is
``{phi_{v1}(0), phi_{v0}(1) : |v| = n - 1}``. The opposite ordering (first
symbol innermost) is available as ``convention="composition"``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BudgetError,
    ClassParameterViolation,
    DepthError,
    DerivativeRangeViolation,
    DomainError,
    FixedPointViolation,
    ImageOverlap,
    ImageRangeViolation,
    ModulusBoundViolation,
)
from .intervals import polynomial_range

ROLES = ("fixes_zero", "fixes_one", "free")
DEFAULT_TOL = 1e-12
MAX_DEPTH = 24
DEFAULT_POINT_CAP = 2**23


@dataclass(frozen=True)
class IfsMap:
    """Polynomial ``sum_r coeffs[r] * (x - 1/2)**r``.

    A map tagged ``fixes_zero`` (``fixes_one``) returns exactly 0.0 (1.0)
    at exactly 0.0 (1.0). The tag is only honoured by validated pairs, where
    the polynomial already fixes the point to within the tolerance; pinning
    keeps endpoint sets nested bit-for-bit across depths.
    """

    coeffs: tuple
    role: str = "free"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role tag {self.role!r}")
        c = tuple(float(v) for v in self.coeffs)
        if not c:
            c = (0.0,)
        if not all(math.isfinite(v) for v in c):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def raw(self, x):
        """Horner evaluation without fixed-point pinning."""
        x = np.asarray(x, dtype=float)
        t = x - 0.5
        acc = np.full_like(t, self.coeffs[-1])
        for c in self.coeffs[-2::-1]:
            acc = acc * t + c
        return acc

    def __call__(self, x):
        y = self.raw(x)
        if self.role == "fixes_zero":
            y = np.where(np.asarray(x) == 0.0, 0.0, y)
        elif self.role == "fixes_one":
            y = np.where(np.asarray(x) == 1.0, 1.0, y)
        return y

    def derivative_coeffs(self) -> np.ndarray:
        c = np.asarray(self.coeffs)
        if c.size == 1:
            return np.zeros(1)
        return c[1:] * np.arange(1, c.size)

    def derivative(self, x):
        d = self.derivative_coeffs()
        t = np.asarray(x, dtype=float) - 0.5
        acc = np.full_like(t, d[-1])
        for c in d[-2::-1]:
            acc = acc * t + c
        return acc

    def disk_modulus_bound(self, R: float) -> float:
        """Upper bound on sup |map| over the complex disk |z - 1/2| <= R."""
        return float(sum(abs(c) * R**r for r, c in enumerate(self.coeffs)))

    def to_json(self) -> dict:
        fixes = {"fixes_zero": "zero", "fixes_one": "one", "free": "none"}[self.role]
        return {"coeffs": list(self.coeffs), "fixes": fixes}

    @classmethod
    def from_json(cls, obj: dict) -> "IfsMap":
        role = {"zero": "fixes_zero", "one": "fixes_one", "none": "free", None: "free"}[
            obj.get("fixes")
        ]
        return cls(tuple(obj["coeffs"]), role)

    @classmethod
    def from_monomial(cls, mono: Sequence[float], role: str = "free") -> "IfsMap":
        """Build from coefficients in powers of x (not x - 1/2)."""
        return cls(tuple(recenter(mono, 0.0, 0.5)), role)


def recenter(coeffs: Sequence[float], old: float, new: float) -> list:
    """Re-expand sum c_r (x-old)^r as sum b_r (x-new)^r (Taylor shift)."""
    b = [float(c) for c in coeffs]
    s = new - old
    n = len(b)
    for i in range(n):
        for j in range(n - 2, i - 1, -1):
            b[j] += s * b[j + 1]
    return b


@dataclass(frozen=True)
class IfsPair:
    """Pair (phi0, phi1) together with its class parameters.

    ``rho_tilde``/``rho`` bound the derivatives on [0, 1]; ``Q`` bounds the
    modulus on the disk of radius ``R`` around 1/2.
    """

    phi0: IfsMap
    phi1: IfsMap
    rho_tilde: float
    rho: float
    Q: float
    R: float

    @property
    def maps(self) -> tuple:
        return (self.phi0, self.phi1)

    def to_json(self) -> dict:
        return {
            "phi0": self.phi0.to_json(),
            "phi1": self.phi1.to_json(),
            "rho_tilde": self.rho_tilde,
            "rho": self.rho,
            "Q": self.Q,
            "R": self.R,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IfsPair":
        return cls(
            IfsMap.from_json(obj["phi0"]),
            IfsMap.from_json(obj["phi1"]),
            float(obj["rho_tilde"]),
            float(obj["rho"]),
            float(obj["Q"]),
            float(obj["R"]),
        )

    def with_class(self, rho_tilde=None, rho=None, Q=None, R=None) -> "IfsPair":
        return IfsPair(
            self.phi0,
            self.phi1,
            self.rho_tilde if rho_tilde is None else rho_tilde,
            self.rho if rho is None else rho,
            self.Q if Q is None else Q,
            self.R if R is None else R,
        )


def ternary_pair(rho_tilde=0.3, rho=0.34, Q=2.0, R=0.6) -> IfsPair:
    """phi0 = x/3, phi1 = (2 + x)/3."""
    third = 1.0 / 3.0
    return IfsPair(
        IfsMap((third / 2, third), "fixes_zero"),
        IfsMap((1.0 - third / 2, third), "fixes_one"),
        rho_tilde,
        rho,
        Q,
        R,
    )


def random_pair(
    rng: np.random.Generator,
    degree: int = 10,
    rho_tilde: float = 0.25,
    rho: float = 0.4,
    Q: float = 2.0,
    R: float = 0.6,
    tail: float = 0.03,
    decay: float | None = None,
    max_tries: int = 200,
) -> IfsPair:
    """Draw a random validated analytic-style pair.

    Each map is a slope term plus a random tail ``sum a_r (x - 1/2)^r`` with
    ``|a_r| <= tail * decay**r``; the constant term is then solved from the
    fixed-point condition. Draws failing validation are discarded.
    """
    if decay is None:
        decay = 1.0 / (2.0 * R)
    for _ in range(max_tries):
        maps = []
        for fix in (0.0, 1.0):
            slope = rng.uniform(rho_tilde + 0.25 * (rho - rho_tilde), rho - 0.25 * (rho - rho_tilde))
            c = np.zeros(degree + 1)
            c[1] = slope
            r = np.arange(2, degree + 1)
            c[2:] = tail * decay**r * rng.uniform(-1.0, 1.0, size=r.size)
            # fix the constant term so that the map fixes `fix`
            c[0] = 0.0
            c[0] = fix - float(IfsMap(tuple(c)).raw(fix))
            maps.append(IfsMap(tuple(c), "fixes_zero" if fix == 0.0 else "fixes_one"))
        pair = IfsPair(maps[0], maps[1], rho_tilde, rho, Q, R)
        if validate_ifs(pair).accepted:
            return pair
    raise RuntimeError("could not draw a valid pair; loosen the class parameters")


# ---------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    passed: bool
    bound: str
    detail: dict = field(default_factory=dict)
    error: type | None = None

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "bound": self.bound, "detail": self.detail}


@dataclass
class ValidationReport:
    checks: list

    @property
    def accepted(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def raise_for_failure(self) -> None:
        for c in self.checks:
            if not c.passed:
                raise c.error(f"{c.name}: {c.bound} ({c.detail})")

    def to_json(self) -> dict:
        return {"accepted": self.accepted, "checks": [c.to_json() for c in self.checks]}


def validate_ifs(pair: IfsPair, tol: float = DEFAULT_TOL, pieces: int = 1024) -> ValidationReport:
    """Check every class invariant of ``pair`` and report the bound used.

    Ranges of the maps and their derivatives on [0, 1] are certified with
    outward-rounded interval Horner evaluation over ``pieces`` subintervals;
    the disk modulus uses the coefficient sum ``sum |c_r| R^r``.
    """
    checks = []
    rt, rho, Q, R = pair.rho_tilde, pair.rho, pair.Q, pair.R
    ok = 0 < rt < rho < 0.5 and R > 0.5 and Q > 1 + R / 2
    checks.append(
        Check(
            "class_parameters",
            ok,
            "0 < rho_tilde < rho < 1/2, R > 1/2, Q > 1 + R/2",
            {"rho_tilde": rt, "rho": rho, "Q": Q, "R": R},
            ClassParameterViolation,
        )
    )
    for i, (m, role, target) in enumerate(
        ((pair.phi0, "fixes_zero", 0.0), (pair.phi1, "fixes_one", 1.0))
    ):
        value = float(m.raw(target))
        checks.append(
            Check(
                f"phi{i}_fixed_point",
                m.role == role and abs(value - target) <= tol,
                f"role {role} and |phi{i}({target:g}) - {target:g}| <= {tol:g}",
                {"role": m.role, "value": value},
                FixedPointViolation,
            )
        )
        d = m.derivative_coeffs()
        dlo, dhi = polynomial_range(d, pieces=pieces, coeff_radius=np.abs(d) * 2**-52)
        if dlo > 0:
            # certified increasing: the image is spanned by the endpoint values
            lo = polynomial_range(m.coeffs, 0.0, 0.0, pieces=1)[0]
            hi = polynomial_range(m.coeffs, 1.0, 1.0, pieces=1)[1]
        else:
            lo, hi = polynomial_range(m.coeffs, pieces=pieces)
        checks.append(
            Check(
                f"phi{i}_image",
                lo >= -tol and hi <= 1 + tol,
                "phi([0,1]) within [0,1]",
                {"lo": lo, "hi": hi},
                ImageRangeViolation,
            )
        )
        checks.append(
            Check(
                f"phi{i}_derivative",
                dlo >= rt - tol and dhi <= rho + tol,
                f"{rt:g} <= phi{i}' <= {rho:g} on [0,1]",
                {"lo": dlo, "hi": dhi},
                DerivativeRangeViolation,
            )
        )
        mod = m.disk_modulus_bound(R)
        checks.append(
            Check(
                f"phi{i}_modulus",
                mod <= Q + tol,
                f"sum |c_r| R^r <= Q = {Q:g} (R = {R:g})",
                {"coefficient_bound": mod},
                ModulusBoundViolation,
            )
        )
    _, right0 = polynomial_range(pair.phi0.coeffs, 1.0, 1.0, pieces=1)
    left1, _ = polynomial_range(pair.phi1.coeffs, 0.0, 0.0, pieces=1)
    checks.append(
        Check(
            "disjoint_images",
            right0 < left1,
            "phi0(1) < phi1(0)",
            {"phi0(1)_upper": right0, "phi1(0)_lower": left1},
            ImageOverlap,
        )
    )
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# words and endpoint sets


def _check_depth(n: int, minimum: int, max_depth: int = MAX_DEPTH) -> None:
    if n < minimum:
        raise DepthError(f"depth must be >= {minimum}, got {n}")
    if n > max_depth:
        raise DepthError(f"depth {n} exceeds the cap {max_depth}")


def word_map(pair, w: Sequence[int], x, convention: str = "endpoint"):
    """Apply the word map of ``w`` to ``x`` (scalar or array in [0, 1])."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0.0) | (xa > 1.0)) or np.any(np.isnan(xa)):
        raise DomainError("word_map is defined on [0, 1]")
    maps = pair.maps
    if convention == "endpoint":
        order = reversed(tuple(w))
    elif convention == "composition":
        order = iter(tuple(w))
    else:
        raise ValueError(f"unknown convention {convention!r}")
    y = xa
    for s in order:
        y = maps[int(s)](y)
    return float(y) if y.ndim == 0 else y


def words(n: int) -> Iterable[tuple]:
    return itertools.product((0, 1), repeat=n)


def _images(maps, pts: np.ndarray, n: int) -> np.ndarray:
    # after n passes the entry for word w sits at binary index w_0 w_1 ... w_{n-1}
    for _ in range(n):
        pts = np.concatenate([maps[0](pts), maps[1](pts)])
    return pts


def endpoint_set(pair, n: int, max_depth: int = MAX_DEPTH) -> np.ndarray:
    """Sorted endpoint set C_n: phi_w(0) and phi_w(1) over all words of length n.

    For a valid pair the result has exactly 2**(n+1) points.
    """
    _check_depth(n, 1, max_depth)
    return np.unique(_images(pair.maps, np.array([0.0, 1.0]), n))


def new_nodes(pair, n: int, max_depth: int = MAX_DEPTH) -> np.ndarray:
    """C_n minus C_{n-1}, built directly as {phi_{v1}(0), phi_{v0}(1) : |v| = n-1}."""
    _check_depth(n, 2, max_depth)
    maps = pair.maps
    seeds = np.array([float(maps[1](0.0)), float(maps[0](1.0))])
    return np.unique(_images(maps, seeds, n - 1))


def new_node_table(pair, n: int) -> list:
    """Rows (word v of length n-1, phi_{v1}(0), phi_{v0}(1)) in lexicographic word order."""
    _check_depth(n, 2)
    maps = pair.maps
    left = _images(maps, np.array([float(maps[1](0.0))]), n - 1)
    right = _images(maps, np.array([float(maps[0](1.0))]), n - 1)
    return [(v, float(left[i]), float(right[i])) for i, v in enumerate(words(n - 1))]


@dataclass(frozen=True)
class IntervalCover:
    lo: np.ndarray
    hi: np.ndarray
    depth: int

    def __len__(self) -> int:
        return self.lo.size

    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    def gaps(self) -> np.ndarray:
        return self.lo[1:] - self.hi[:-1]

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        idx = np.searchsorted(self.lo, p, side="right") - 1
        idx = np.clip(idx, 0, self.lo.size - 1)
        return (p >= self.lo[idx] - tol) & (p <= self.hi[idx] + tol)

    def rows(self) -> np.ndarray:
        return np.column_stack([self.lo, self.hi])


def interval_cover(pair, n: int, max_depth: int = MAX_DEPTH) -> IntervalCover:
    """The 2**n level-n intervals [phi_w(0), phi_w(1)], sorted."""
    _check_depth(n, 1, max_depth)
    lo = _images(pair.maps, np.array([0.0]), n)
    hi = _images(pair.maps, np.array([1.0]), n)
    order = np.argsort(lo, kind="stable")
    return IntervalCover(lo[order], hi[order], n)


def approx_depth(pair: IfsPair, eps: float, max_depth: int = MAX_DEPTH) -> int:
    """Smallest n >= 1 with rho**n <= eps."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    n = 1
    while pair.rho**n > eps:
        n += 1
        if n > 4 * max_depth + 64:
            break
    return n


def cantor_approx(
    pair: IfsPair, eps: float, point_cap: int = DEFAULT_POINT_CAP, max_depth: int = MAX_DEPTH
) -> np.ndarray:
    """Endpoint set at the smallest depth with rho**n <= eps.

    Every level-n interval has length <= rho**n and both its endpoints lie in
    the Cantor set, so the result is within Hausdorff distance eps of it.
    """
    n = approx_depth(pair, eps, max_depth)
    if 2 ** (n + 1) > point_cap:
        raise BudgetError(f"depth {n} needs {2 ** (n + 1)} points, cap is {point_cap}")
    return endpoint_set(pair, n, max_depth=max(max_depth, n))
