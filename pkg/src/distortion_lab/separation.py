"""Interpolation perturbations, separated families of Cantor sets, the
coefficient net, greedy capacity estimation and the refinement schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BudgetError,
    ClassEscape,
    DriftViolation,
    DuplicateNodes,
    ExponentGapTooSmall,
    GammaTooSmall,
    GrowthOverflow,
    HypothesisViolation,
)
from .ifs_core import (
    IfsMap,
    IfsPair,
    cantor_approx,
    endpoint_set,
    new_node_table,
    validate_ifs,
)
from .metrics import Hole, hausdorff, hole_certificate, separation_certificate

LOG2_MAX_FLOAT = math.log2(np.finfo(float).max)


# ---------------------------------------------------------------------------
# barycentric interpolation


class BarycentricPolynomial:
    """Interpolating polynomial in second-kind barycentric form.

    Weights are normalised by their largest modulus; the formula is invariant
    under a common scale, and this keeps clustered nodes from overflowing.
    """

    def __init__(self, nodes, values):
        x = np.asarray(nodes, dtype=float)
        y = np.asarray(values)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("nodes and values must be 1-d and of equal length")
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise DuplicateNodes("interpolation nodes must be distinct")
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        logw = -np.log(np.abs(diff)).sum(axis=1)
        sign = np.prod(np.sign(diff), axis=1)
        self.nodes = x
        self.values = y
        self.weights = sign * np.exp(logw - logw.max())

    @property
    def degree(self) -> int:
        return self.nodes.size - 1

    def __call__(self, z):
        z = np.asarray(z)
        out_dtype = np.result_type(z.dtype, self.values.dtype, float)
        flat = z.ravel().astype(out_dtype)
        d = flat[:, None] - self.nodes[None, :]
        exact = d == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            k = self.weights / d
            res = (k * self.values).sum(axis=1) / k.sum(axis=1)
        hit = exact.any(axis=1)
        if hit.any():
            res[hit] = self.values[np.argmax(exact[hit], axis=1)]
        return res.reshape(z.shape) if z.ndim else res[0]

    def differentiation_matrix(self) -> np.ndarray:
        x, w = self.nodes, self.weights
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        D = (w[None, :] / w[:, None]) / diff
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))
        return D

    def derivative(self, z):
        """p'(z): differentiation matrix at nodes, Schneider-Werner elsewhere."""
        z = np.asarray(z)
        out_dtype = np.result_type(z.dtype, self.values.dtype, float)
        flat = z.ravel().astype(out_dtype)
        d = flat[:, None] - self.nodes[None, :]
        exact = d == 0
        hit = exact.any(axis=1)
        res = np.empty(flat.shape, dtype=out_dtype)
        if (~hit).any():
            dd = d[~hit]
            k = self.weights / dd
            p = (k * self.values).sum(axis=1) / k.sum(axis=1)
            num = (k * (p[:, None] - self.values) / dd).sum(axis=1)
            res[~hit] = num / k.sum(axis=1)
        if hit.any():
            dv = self.differentiation_matrix() @ self.values
            res[hit] = dv[np.argmax(exact[hit], axis=1)]
        return res.reshape(z.shape) if z.ndim else res[0]

    def centered_coeffs(self, center: float = 0.5) -> np.ndarray:
        """Coefficients in powers of (x - center), from the exact basis expansion."""
        B = lagrange_basis_coeffs(self.nodes, center)
        vals = [Fraction(float(v)) for v in np.real(self.values)]
        return np.array([float(sum(v * b[r] for v, b in zip(vals, B))) for r in range(len(B))])


def lagrange_interpolate(nodes, values) -> BarycentricPolynomial:
    return BarycentricPolynomial(nodes, values)


def lagrange_basis_coeffs(nodes: Sequence[float], center: float = 0.5) -> list:
    """Exact rational coefficients of every Lagrange basis polynomial in (x - center).

    Row j lists l_j's coefficients, lowest degree first. Nodes are binary
    floats and therefore exact rationals, so the expansion has no rounding.
    """
    xs = [Fraction(float(v)) - Fraction(center) for v in nodes]
    n = len(xs)
    out = []
    for j in range(n):
        poly = [Fraction(1)]
        denom = Fraction(1)
        for k in range(n):
            if k == j:
                continue
            # multiply by (t - xs[k])
            nxt = [Fraction(0)] * (len(poly) + 1)
            for r, c in enumerate(poly):
                nxt[r + 1] += c
                nxt[r] -= xs[k] * c
            poly = nxt
            denom *= xs[j] - xs[k]
        out.append([c / denom for c in poly])
    return out


def disk_norms(coeffs, R: float) -> tuple:
    """Certified (sup |p|, sup |p'|) on the disk |z - 1/2| <= R via coefficient sums."""
    c = np.abs(np.asarray(coeffs, dtype=float))
    r = np.arange(c.size)
    sup = float((c * R**r).sum())
    dsup = float((r[1:] * c[1:] * R ** (r[1:] - 1)).sum()) if c.size > 1 else 0.0
    return sup, dsup


def interp_growth_log2(pair: IfsPair, n: int, sup_values: float) -> float:
    """log2 of 16 * 4^n * (1/2 + R)^(2^n + 2) * rho_tilde^(-8 * 2^n) * sup_values."""
    if n < 1:
        raise ValueError("depth must be >= 1")
    if sup_values == 0:
        return -math.inf
    return (
        4
        + 2 * n
        + (2**n + 2) * math.log2(0.5 + pair.R)
        - 8 * 2**n * math.log2(pair.rho_tilde)
        + math.log2(abs(sup_values))
    )


def interp_growth_bound(pair: IfsPair, n: int, sup_values: float) -> float:
    """Bound on sup|h| + sup|h'| over the disk for interpolation on C_n."""
    lg = interp_growth_log2(pair, n, sup_values)
    if lg == -math.inf:
        return 0.0
    if lg >= LOG2_MAX_FLOAT:
        raise GrowthOverflow(lg)
    return 2.0**lg


def sampled_disk_sup(poly: BarycentricPolynomial, R: float, circle: int = 720, grid: int = 1001) -> float:
    """Sampled sup|h| + sup|h'| over the circle of radius R about 1/2 and the unit interval."""
    z = 0.5 + R * np.exp(2j * np.pi * np.arange(circle) / circle)
    x = np.linspace(0.0, 1.0, grid)
    h = max(np.abs(poly(z)).max(), np.abs(poly(x)).max())
    dh = max(np.abs(poly.derivative(z)).max(), np.abs(poly.derivative(x)).max())
    return float(h + dh)


def propagation_bound(base: IfsPair, g0_sup: float, g1_sup: float, deriv_sum: float | None = None) -> float:
    """Uniform bound on |phi_w - phi0_w| over all words for the perturbed pair.

    ``deriv_sum`` (sup|g0'| + sup|g1'| on [0, 1]), when given, is checked
    against the smallness hypothesis.
    """
    if deriv_sum is not None:
        limit = min(base.rho_tilde, 0.5 - base.rho)
        if not deriv_sum < limit:
            raise HypothesisViolation(
                f"derivative sum {deriv_sum:g} must be < min(rho_tilde, 1/2 - rho) = {limit:g}"
            )
    return max(g0_sup, g1_sup) / (1.0 - base.rho)


# ---------------------------------------------------------------------------
# separated families


def schedule_depth(eps0: float) -> int:
    return math.floor(math.log2(math.log(1.0 / eps0)))


def exponent_threshold(pair: IfsPair) -> float:
    """5 + 2 log2(R + 1/2) - 16 log2(rho_tilde)."""
    return 5 + 2 * math.log2(pair.R + 0.5) - 16 * math.log2(pair.rho_tilde)


@dataclass
class PerturbationAssignment:
    """J values indexed by the 2^(N-1) words of length N-1 (rows in lexicographic order).

    Column k holds J_{k+1}: J1/J2 set g0 at phi_{w1}(0)/phi_{w0}(1), J3/J4 set g1.
    """

    N: int
    J: np.ndarray
    eps0: float
    log2_eps1: float

    def flat(self) -> list:
        return [int(v) for v in self.J.ravel()]


@dataclass
class PerturbedPair:
    base: IfsPair
    pair: IfsPair
    g0: np.ndarray
    g1: np.ndarray
    assignment: PerturbationAssignment
    validation: object = None


@dataclass
class FamilyContext:
    """Quantities shared by every member built on one base pair."""

    base: IfsPair
    N: int
    nodes: np.ndarray
    table: list
    basis: list
    new_index: list
    S: float
    hole_lo: np.ndarray
    hole_hi: np.ndarray


def family_context(base: IfsPair, N: int) -> FamilyContext:
    nodes = endpoint_set(base, N)
    table = new_node_table(base, N)
    basis = lagrange_basis_coeffs(nodes)
    pos = {float(v): i for i, v in enumerate(nodes)}
    # per word: index of phi_{w1}(0) and of phi_{w0}(1) among the nodes
    new_index = [(pos[u1], pos[u0]) for _, u1, u0 in table]
    S = 0.0
    R = base.R
    for i1, i0 in new_index:
        for i in (i1, i0):
            sup, dsup = disk_norms([float(c) for c in basis[i]], R)
            S += sup + dsup
    u0 = np.array([row[2] for row in table])
    u1 = np.array([row[1] for row in table])
    # level-(N+1) gaps [phi_i(phi_{w0}(1)), phi_i(phi_{w1}(0))]
    hole_lo = np.array([base.maps[i](u0) for i in (0, 1)])
    hole_hi = np.array([base.maps[i](u1) for i in (0, 1)])
    return FamilyContext(base, N, nodes, table, basis, new_index, S, hole_lo, hole_hi)


def j_cap(ctx: FamilyContext, eps0: float, log2_eps1: float) -> int:
    """Largest J keeping sup|g|+sup|g'| over the disk, summed over both maps, <= eps0/4."""
    sqrt_cap = math.floor(2 ** ((math.log2(eps0) - log2_eps1) / 2))
    lg = math.log2(eps0 / 8) - log2_eps1 - math.log2(ctx.S)
    coef_cap = math.floor(2**lg) if lg < 62 else 2**62
    return max(0, min(sqrt_cap, coef_cap))


def perturbation_coeffs(ctx: FamilyContext, J: np.ndarray, eps1: float) -> tuple:
    """Centered coefficients of (g0, g1) for assignment J."""
    n = len(ctx.basis)
    vals = [[Fraction(0)] * n, [Fraction(0)] * n]
    for row, (i1, i0) in zip(J, ctx.new_index):
        vals[0][i1] = Fraction(-int(row[0]))
        vals[0][i0] = Fraction(int(row[1]))
        vals[1][i1] = Fraction(-int(row[2]))
        vals[1][i0] = Fraction(int(row[3]))
    out = []
    for v in vals:
        coeffs = [sum(v[j] * ctx.basis[j][r] for j in range(n) if v[j]) for r in range(n)]
        out.append(np.array([float(c) * eps1 for c in coeffs]))
    return out[0], out[1]


def _add(base_map: IfsMap, g: np.ndarray) -> IfsMap:
    c = np.zeros(max(len(base_map.coeffs), g.size))
    c[: len(base_map.coeffs)] = base_map.coeffs
    c[: g.size] += g
    return IfsMap(tuple(c), base_map.role)


def build_member(ctx: FamilyContext, J: np.ndarray, eps0: float, log2_eps1: float) -> PerturbedPair:
    eps1 = 2.0**log2_eps1
    g0, g1 = perturbation_coeffs(ctx, J, eps1)
    b = ctx.base
    pair = IfsPair(
        _add(b.phi0, g0), _add(b.phi1, g1), b.rho_tilde - eps0, b.rho + eps0, b.Q + eps0, b.R
    )
    return PerturbedPair(b, pair, g0, g1, PerturbationAssignment(ctx.N, np.array(J), eps0, log2_eps1))


def member_holes(ctx: FamilyContext, J: np.ndarray, w: int, i: int, unit: Fraction) -> tuple:
    """Exact hole endpoints (c, d) of a member at word index w for map i."""
    plus, minus = (J[w, 1], J[w, 0]) if i == 0 else (J[w, 3], J[w, 2])
    c = Fraction(float(ctx.hole_lo[i, w])) + int(plus) * unit
    d = Fraction(float(ctx.hole_hi[i, w])) - int(minus) * unit
    return c, d


def pair_certificate(ctx: FamilyContext, Ja: np.ndarray, Jb: np.ndarray, unit: Fraction):
    """Symbolic hole certificate for two assignments, at the first differing entry."""
    diff = np.argwhere(Ja != Jb)
    if diff.size == 0:
        return None, None
    w, k = (int(v) for v in diff[0])
    i = 0 if k < 2 else 1
    ca, da = member_holes(ctx, Ja, w, i, unit)
    cb, db = member_holes(ctx, Jb, w, i, unit)
    return hole_certificate(ca, da, cb, db, unit), (w, i)


@dataclass
class Family:
    members: list
    context: FamilyContext
    eps0: float
    log2_eps1: float
    off_schedule: bool
    report: dict
    pairwise: list = field(default_factory=list)

    def certifier(self) -> Callable:
        unit = _unit(self.log2_eps1)

        def certify(a: int, b: int) -> bool:
            cert, _ = pair_certificate(
                self.context, self.members[a].assignment.J, self.members[b].assignment.J, unit
            )
            return cert is not None and cert.certified

        return certify

    def to_json(self) -> dict:
        return {
            "base": self.context.base.to_json(),
            "N": self.context.N,
            "eps0": self.eps0,
            "log2_eps1": self.log2_eps1,
            "off_schedule": self.off_schedule,
            "members": [
                {"J": m.assignment.flat(), "validation_accepted": m.validation.accepted}
                for m in self.members
            ],
            "report": self.report,
        }


def _unit(log2_eps1: float) -> Fraction:
    if float(log2_eps1).is_integer():
        return Fraction(1, 2 ** int(-log2_eps1)) if log2_eps1 <= 0 else Fraction(2 ** int(log2_eps1))
    return Fraction(2.0**log2_eps1)


def build_family(
    base: IfsPair,
    eps0: float,
    eps1: float | None = None,
    count: int = 16,
    *,
    log2_eps1: float | None = None,
    N: int | None = None,
    seed: int = 0,
    closeness_depth: int = 12,
) -> Family:
    """Build ``count`` perturbations of ``base`` that are pairwise eps1-separated.

    Each member adds interpolating polynomials g0, g1 that vanish on
    C_{N-1}(base) and take the values -J1 eps1, +J2 eps1 (g0) and
    -J3 eps1, +J4 eps1 (g1) at the new level-N nodes phi_{w1}(0), phi_{w0}(1).
    J entries are odd, so two distinct assignments differ by at least 2 in
    some entry and the corresponding level-(N+1) holes are displaced by at
    least 2 eps1. J is capped so that the certified disk norms of the
    perturbation stay within eps0/4.

    With ``N`` given the run is flagged off-schedule and the exponent gap on
    eps1 is reported but not enforced.
    """
    if log2_eps1 is None:
        if eps1 is None:
            raise ValueError("give eps1 or log2_eps1")
        log2_eps1 = math.log2(eps1)
    log2_eps0 = math.log2(eps0)
    validate_ifs(base).raise_for_failure()
    off_schedule = N is not None
    depth = schedule_depth(eps0) if N is None else int(N)
    if depth < 2:
        raise ExponentGapTooSmall(f"depth N = {depth} from eps0 = {eps0:g} is below 2; use an override")
    expo = exponent_threshold(base)
    gap_ok = log2_eps1 < expo * log2_eps0
    if not gap_ok and not off_schedule:
        raise ExponentGapTooSmall(
            f"need log2(eps1) < {expo:.4f} * log2(eps0) = {expo * log2_eps0:.4f}, got {log2_eps1:g}"
        )

    ctx = family_context(base, depth)
    cap = j_cap(ctx, eps0, log2_eps1)
    odd = (cap + 1) // 2
    words = len(ctx.table)
    space_log2 = 4 * words * math.log2(odd) if odd > 0 else -math.inf
    if odd < 1 or space_log2 < math.log2(max(count, 1)):
        raise ExponentGapTooSmall(f"J range capped at {cap}; cannot draw {count} distinct members")

    rng = np.random.default_rng(seed)
    seen, Js = set(), []
    while len(Js) < count:
        J = 2 * rng.integers(0, odd, size=(words, 4)) + 1
        key = J.tobytes()
        if key not in seen:
            seen.add(key)
            Js.append(J)

    members = []
    for J in Js:
        m = build_member(ctx, J, eps0, log2_eps1)
        m.validation = validate_ifs(m.pair)
        if not m.validation.accepted:
            f = m.validation.failures[0]
            raise ClassEscape(f"member J={m.assignment.flat()} fails {f.name}: {f.bound} ({f.detail})")
        members.append(m)

    report = family_report(ctx, members, eps0, log2_eps1, cap, closeness_depth)
    report.update(
        {
            "N": depth,
            "schedule_N": schedule_depth(eps0),
            "off_schedule": off_schedule,
            "exponent_threshold": expo,
            "exponent_gap_ok": gap_ok,
            "j_cap": cap,
            "j_odd_values": odd,
            "assignment_space_log2": space_log2,
        }
    )
    fam = Family(members, ctx, eps0, log2_eps1, off_schedule, report)
    fam.pairwise = pairwise_certificates(fam)
    report["pairwise_certified"] = all(row["certified"] for row in fam.pairwise)
    report["pairs"] = len(fam.pairwise)
    return fam


def family_report(ctx, members, eps0, log2_eps1, cap, closeness_depth) -> dict:
    b = ctx.base
    eps1 = 2.0**log2_eps1
    base_cloud = endpoint_set(b, closeness_depth)
    disk, closeness, prop = [], [], []
    for m in members:
        s0, d0 = disk_norms(m.g0, b.R)
        s1, d1 = disk_norms(m.g1, b.R)
        disk.append(s0 + s1)
        prop.append(propagation_bound(b, s0, s1, deriv_sum=d0 + d1))
        measured = hausdorff(base_cloud, endpoint_set(m.pair, closeness_depth))
        # each depth-n endpoint set is within rho'^n of its own Cantor set
        closeness.append(measured + 2 * (b.rho + eps0) ** closeness_depth)
    n_paper = ctx.N
    sq = math.floor(2 ** ((math.log2(eps0) - log2_eps1) / 2))
    card_log = 2 ** (n_paper - 2) * math.log(sq) if n_paper >= 2 else 0.0
    lower_log = 2**-4 * (math.log(eps0) - log2_eps1 * math.log(2)) * math.log(1 / eps0)
    chain_log2 = (
        2
        + n_paper
        + 2**n_paper * math.log2(0.5 + b.R)
        - 8 * 2**n_paper * math.log2(b.rho_tilde)
        + n_paper * math.log2(b.rho)
        + 0.5 * (math.log2(eps0) + log2_eps1)
    )
    return {
        "eps0": eps0,
        "log2_eps1": log2_eps1,
        "members": len(members),
        "all_valid_relaxed": all(m.validation.accepted for m in members),
        "max_disk_distance": max(disk),
        "coefficient_closeness_ok": max(disk) <= eps0 / 4,
        "max_propagation_bound": max(prop),
        "max_closeness_bound": max(closeness),
        "closeness_ok": max(closeness) <= eps0 / 3,
        "paper_card_log": card_log,
        "paper_card_lower_log": lower_log,
        "paper_card_ok": card_log >= lower_log,
        "paper_card_lower_log_2e-8": lower_log / 16,
        "bound_chain_log2": chain_log2,
        "bound_chain_ok": chain_log2 <= math.log2(eps0 / 4),
        "lagrange_S": ctx.S,
        "eps1": eps1,
    }


def pairwise_certificates(fam: Family, numeric: bool | None = None) -> list:
    """Certify every pair of members, symbolically in units of eps1.

    When eps1 is resolvable in double precision the holes are also checked
    against numeric endpoint sets of the members and the float certificate
    is recomputed from them.
    """
    ctx = fam.context
    unit = _unit(fam.log2_eps1)
    if numeric is None:
        numeric = fam.log2_eps1 >= -45
    depth = ctx.N + 2
    clouds = [endpoint_set(m.pair, depth) for m in fam.members] if numeric else None
    eps1 = float(unit)
    rows = []
    for a in range(len(fam.members)):
        for b in range(a + 1, len(fam.members)):
            Ja, Jb = fam.members[a].assignment.J, fam.members[b].assignment.J
            cert, loc = pair_certificate(ctx, Ja, Jb, unit)
            row = {"a": a, "b": b, "certified": bool(cert and cert.certified)}
            if cert is not None:
                row["margin_eps1"] = float((cert.witness_depth - unit) / unit)
                row["word"], row["map"] = loc
            if numeric and cert is not None:
                w, i = loc
                ha = _numeric_hole(fam.members[a].pair, ctx, w, i, "a")
                hb = _numeric_hole(fam.members[b].pair, ctx, w, i, "b")
                num = separation_certificate(clouds[a], ha, clouds[b], hb, eps1)
                row["numeric_certified"] = num.certified
                row["certified"] = row["certified"] and num.certified
            rows.append(row)
    return rows


def _numeric_hole(pair: IfsPair, ctx: FamilyContext, w: int, i: int, owner: str) -> Hole:
    _, u1, u0 = ctx.table[w]
    return Hole(float(pair.maps[i](u0)), float(pair.maps[i](u1)), owner)


# ---------------------------------------------------------------------------
# coefficient net


def net_degree(pair: IfsPair, eps: float) -> int:
    """N = ceil(log(16 Q / ((2R - 1) eps (1 - rho))) / log(2R))."""
    if not pair.R > 0.5:
        raise ValueError("the net needs 2R > 1")
    return math.ceil(
        math.log(16 * pair.Q / ((2 * pair.R - 1) * eps * (1 - pair.rho))) / math.log(2 * pair.R)
    )


def net_step(pair: IfsPair, eps: float) -> float:
    return eps * (1 - pair.rho) / 16


def net_index_bound(pair: IfsPair, eps: float, n: int) -> float:
    return 17 * pair.Q / ((2 * pair.R) ** n * eps * (1 - pair.rho))


@dataclass
class QuantizedNetElement:
    """Real-part grid indices of one map truncated at degree N."""

    N: int
    step: float
    indices: tuple
    in_box: bool

    def coeffs(self) -> np.ndarray:
        return np.array(self.indices, dtype=float) * self.step


def quantize_map(m: IfsMap, pair: IfsPair, eps: float) -> QuantizedNetElement:
    N = net_degree(pair, eps)
    step = net_step(pair, eps)
    c = np.asarray(m.coeffs[: N + 1], dtype=float)
    idx = tuple(int(v) for v in np.rint(c / step))
    in_box = all(abs(p) <= net_index_bound(pair, eps, r) for r, p in enumerate(idx))
    return QuantizedNetElement(N, step, idx, in_box)


def quantize_to_net(pair: IfsPair, eps: float) -> tuple:
    return quantize_map(pair.phi0, pair, eps), quantize_map(pair.phi1, pair, eps)


def reconstruct(elements: tuple, template: IfsPair) -> IfsPair:
    """Pair built from net elements; roles are free since fixed points move."""
    e0, e1 = elements
    return IfsPair(
        IfsMap(tuple(e0.coeffs())),
        IfsMap(tuple(e1.coeffs())),
        template.rho_tilde,
        template.rho,
        template.Q,
        template.R,
    )


def net_error_bound(pair: IfsPair, element: QuantizedNetElement, m: IfsMap) -> float:
    """Certified sup over [0, 1] of |map - reconstruction|: rounding plus actual tail."""
    rounding = sum(element.step / 2 * 0.5**r for r in range(element.N + 1))
    tail = sum(abs(c) * 0.5**r for r, c in enumerate(m.coeffs) if r > element.N)
    return rounding + tail


def net_count_log2(pair: IfsPair, eps: float) -> float:
    """log2 of the number of real-part net elements for a pair."""
    N = net_degree(pair, eps)
    return 2 * sum(
        math.log2(2 * math.floor(net_index_bound(pair, eps, n)) + 1) for n in range(N + 1)
    )


def net_count_bound_log2(pair: IfsPair, eps: float) -> float:
    """log2 of (34 Q / (eps (1 - rho)))^N."""
    return net_degree(pair, eps) * math.log2(34 * pair.Q / (eps * (1 - pair.rho)))


# ---------------------------------------------------------------------------
# capacity


def capacity_estimate(
    family: Sequence,
    eps: float,
    certify: Callable | None = None,
    point_cap: int = 2**20,
) -> int:
    """Greedy packing of pairwise eps-separated Cantor sets.

    ``family`` holds IfsPair objects, PerturbedPair objects or a Family. A
    member is kept iff it is certified > eps away from every kept member:
    numerically when both approximations (each within eps/4) are more than
    eps + eps/2 apart, otherwise through ``certify(i, j)`` when available.
    """
    if isinstance(family, Family):
        certify = certify or family.certifier()
        family = family.members
    pairs = [f.pair if isinstance(f, PerturbedPair) else f for f in family]
    clouds = []
    for p in pairs:
        try:
            clouds.append(cantor_approx(p, eps / 4, point_cap=point_cap))
        except BudgetError:
            clouds.append(None)
    kept: list = []
    for i in range(len(pairs)):
        ok = True
        for j in kept:
            sep = False
            if clouds[i] is not None and clouds[j] is not None:
                sep = hausdorff(clouds[i], clouds[j]) > eps + 2 * eps / 4
            if not sep and certify is not None:
                sep = bool(certify(j, i))
            if not sep:
                ok = False
                break
        if ok:
            kept.append(i)
    return len(kept)


# ---------------------------------------------------------------------------
# refinement schedule


@dataclass(frozen=True)
class Stage:
    p: int
    log2_eps: float
    rho_tilde: float
    rho: float
    Q: float

    @property
    def eps(self) -> float:
        return 2.0**self.log2_eps

    def to_json(self) -> dict:
        return {"p": self.p, "log2_eps": self.log2_eps, "eps": self.eps,
                "rho_tilde": self.rho_tilde, "rho": self.rho, "Q": self.Q}


def gamma_threshold(R: float, rho_tilde0: float) -> float:
    return 5 + 2 * math.log2(R + 0.5) - 16 * math.log2(rho_tilde0 / 2)


def refinement_schedule(
    K: float, gamma: float, stages: int, rho_tilde0: float, rho0: float, Q0: float, R: float
) -> list:
    """eps_p = 2^(-K gamma^p) with class parameters relaxed by the running sum of eps."""
    g_min = gamma_threshold(R, rho_tilde0)
    if not gamma > g_min:
        raise GammaTooSmall(f"gamma = {gamma:g} must exceed {g_min:.4f}")
    out = []
    rt, r, q = rho_tilde0, rho0, Q0
    for p in range(stages):
        log2_eps = -K * gamma**p
        out.append(Stage(p, log2_eps, rt, r, q))
        if not (rt > rho_tilde0 / 2 and r < (2 * rho0 + 1) / 4):
            raise DriftViolation(
                f"stage {p}: rho_tilde = {rt:g} (needs > {rho_tilde0 / 2:g}), "
                f"rho = {r:g} (needs < {(2 * rho0 + 1) / 4:g})"
            )
        e = 2.0**log2_eps
        rt, r, q = rt - e, r + e, q + e
    return out


def drift_sum(K: float, gamma: float, stages: int) -> float:
    return math.fsum(2.0 ** (-K * gamma**p) for p in range(stages))
