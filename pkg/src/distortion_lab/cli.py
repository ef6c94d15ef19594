"""Batch command line front-end.

Exit codes: 0 success, 2 configuration, 3 validation or certification,
4 budget, 5 exponent gap too small, 6 a ``--recheck`` found a mismatch.
"""
from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
from pathlib import Path

import numpy as np

from . import complexity as cx
from . import hyperbolic as hy
from . import io
from .errors import (
    BudgetError,
    CertificationFailure,
    ClassEscape,
    DecodeError,
    DistortionLabError,
    ExponentGapTooSmall,
    GammaTooSmall,
    NoAdmissibleM,
    RateSignError,
    ValidationError,
)
from .ifs_core import (
    approx_depth,
    cantor_approx,
    endpoint_set,
    interval_cover,
    validate_ifs,
)
from .metrics import (
    bernoulli_measure,
    hausdorff,
    kantorovich_1d,
    kantorovich_lp,
)
from .separation import (
    build_family,
    capacity_estimate,
    family_context,
    pair_certificate,
    refinement_schedule,
    _unit,
)

EXIT_CONFIG, EXIT_VALIDATION, EXIT_BUDGET, EXIT_GAP, EXIT_RECHECK = 2, 3, 4, 5, 6
REFERENCE_EXTRA_DEPTH = 6


class ConfigError(Exception):
    pass


def parse_eps(text) -> float:
    """A float, or ``2^-k``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip()
    if s.startswith("2^"):
        return 2.0 ** float(s[2:])
    return float(s)


def parse_schedule(text) -> list:
    """Comma list of eps values, or ``a:b`` for 2^-a down to 2^-b."""
    if isinstance(text, list):
        vals = [parse_eps(v) for v in text]
    elif ":" in str(text):
        a, b = (int(v) for v in str(text).split(":"))
        vals = [2.0**-k for k in range(a, b + 1)]
    else:
        vals = [parse_eps(v) for v in str(text).split(",")]
    if any(y >= x for x, y in zip(vals, vals[1:])):
        raise ConfigError("eps schedule must be strictly decreasing")
    return vals


# ---------------------------------------------------------------------------
# ifs


def _copy_input(src, out: Path, name: str) -> Path | None:
    if src in (None, "ternary"):
        return None
    dst = out / name
    shutil.copyfile(src, dst)
    return dst


def _pair_artifact(args, out: Path):
    pair = io.load_pair(args.pair)
    io.write_json(out / "pair.json", pair.to_json())
    return pair


def cmd_ifs(args, out: Path) -> list:
    pair = _pair_artifact(args, out)
    outputs = ["pair.json"]
    if args.action == "validate":
        report = validate_ifs(pair)
        io.write_json(out / "validation.json", report.to_json())
        outputs.append("validation.json")
        if not report.accepted:
            _finish(args, out, outputs)
            report.raise_for_failure()
        return outputs
    validate_ifs(pair).raise_for_failure()
    if args.action == "approx":
        eps = parse_eps(args.eps)
        pts = cantor_approx(pair, eps, point_cap=args.point_cap)
        n = approx_depth(pair, eps)
        cert = _approx_certificate(pair, pts, eps, n)
        io.write_cloud(out / "points.csv", pts)
        io.write_json(out / "certificate.json", cert)
        outputs += ["points.csv", "certificate.json"]
        if not cert["certified"]:
            _finish(args, out, outputs)
            raise CertificationFailure(f"approximation is {cert['distance']:g} from the reference")
    elif args.action == "endpoints":
        io.write_cloud(out / "endpoints.csv", endpoint_set(pair, args.depth))
        outputs.append("endpoints.csv")
    elif args.action == "cover":
        io.write_csv(out / "cover.csv", interval_cover(pair, args.depth).rows(), ["lo", "hi"])
        outputs.append("cover.csv")
    return outputs


def _approx_certificate(pair, pts, eps, n) -> dict:
    ref_depth = n + REFERENCE_EXTRA_DEPTH
    ref = endpoint_set(pair, ref_depth, max_depth=max(ref_depth, 24))
    dist = hausdorff(pts, ref)
    ref_err = pair.rho**ref_depth
    return {
        "eps": eps,
        "depth": n,
        "points": int(len(pts)),
        "reference_depth": ref_depth,
        "reference_error": ref_err,
        "distance": dist,
        "certified": bool(dist + ref_err <= eps),
    }


def recheck_ifs(out: Path, manifest: dict) -> list:
    from .ifs_core import IfsPair

    pair = IfsPair.from_json(io.read_json(out / "pair.json"))
    action = manifest["config"]["action"]
    problems = []
    if action == "validate":
        if validate_ifs(pair).to_json() != io.read_json(out / "validation.json"):
            problems.append("validation report differs")
    elif action == "approx":
        stored = io.read_json(out / "certificate.json")
        pts = io.read_csv(out / "points.csv")
        again = _approx_certificate(pair, pts, stored["eps"], stored["depth"])
        if again["certified"] != stored["certified"] or not again["certified"]:
            problems.append(f"certificate not reproduced: distance {again['distance']:g}")
    elif action == "endpoints":
        pts = io.read_csv(out / "endpoints.csv")
        if not np.array_equal(pts, endpoint_set(pair, manifest["config"]["depth"])):
            problems.append("endpoint set differs")
    elif action == "cover":
        rows = io.read_csv(out / "cover.csv")
        if not np.array_equal(rows, interval_cover(pair, manifest["config"]["depth"]).rows()):
            problems.append("interval cover differs")
    return problems


# ---------------------------------------------------------------------------
# dist


def _distance(args, a_path, b_path) -> dict:
    if args.action == "hausdorff":
        A, B = io.read_csv(a_path), io.read_csv(b_path)
        period = None
        if args.period:
            period = [None if p in ("", "none") else float(p) for p in args.period.split(",")]
        return {"metric": "hausdorff", "period": period, "value": hausdorff(A, B, period=period)}
    mu, nu = io.load_measure(a_path), io.load_measure(b_path)
    if mu.dim == 1 and nu.dim == 1 and args.method != "lp":
        return {"metric": "w1", "method": "1d", "value": kantorovich_1d(mu, nu)}
    return {"metric": "w1", "method": "lp", "value": kantorovich_lp(mu, nu)}


def cmd_dist(args, out: Path) -> list:
    suffix = ".csv" if args.action == "hausdorff" else ".json"
    a = _copy_input(args.a, out, "a" + suffix)
    b = _copy_input(args.b, out, "b" + suffix)
    result = _distance(args, a, b)
    result["inputs"] = {"a": str(args.a), "b": str(args.b),
                        "a_sha256": io.sha256_file(a), "b_sha256": io.sha256_file(b)}
    io.write_json(out / "distance.json", result)
    return ["a" + suffix, "b" + suffix, "distance.json"]


def recheck_dist(out: Path, manifest: dict) -> list:
    cfg = argparse.Namespace(**manifest["config"])
    suffix = ".csv" if cfg.action == "hausdorff" else ".json"
    stored = io.read_json(out / "distance.json")
    again = _distance(cfg, out / ("a" + suffix), out / ("b" + suffix))
    if not math.isclose(again["value"], stored["value"], rel_tol=0, abs_tol=1e-12):
        return [f"distance {again['value']!r} != stored {stored['value']!r}"]
    return []


# ---------------------------------------------------------------------------
# family


def cmd_family(args, out: Path) -> list:
    pair = _pair_artifact(args, out)
    eps0 = parse_eps(args.eps0)
    fam = build_family(pair, eps0, count=args.count, log2_eps1=args.log2_eps1, N=args.N, seed=args.seed)
    manifest = fam.to_json()
    io.write_json(out / "family.json", manifest)
    rows = [
        (r["a"], r["b"], r["certified"], r.get("margin_eps1", float("nan")), r.get("numeric_certified", ""))
        for r in fam.pairwise
    ]
    io.write_csv(out / "margins.csv", rows, ["a", "b", "certified", "margin_eps1", "numeric_certified"])
    packing = {"eps": 2.0**args.log2_eps1, "members": len(fam.members),
               "capacity_estimate": capacity_estimate(fam, 2.0**args.log2_eps1)}
    if args.refine:
        K, gamma, stages = args.refine
        stages_out = refinement_schedule(K, gamma, int(stages), pair.rho_tilde, pair.rho, pair.Q, pair.R)
        packing["schedule"] = [s.to_json() for s in stages_out]
    io.write_json(out / "packing.json", packing)
    return ["pair.json", "family.json", "margins.csv", "packing.json"]


def recheck_family(out: Path, manifest: dict) -> list:
    from .ifs_core import IfsPair

    fam = io.read_json(out / "family.json")
    base = IfsPair.from_json(fam["base"])
    ctx = family_context(base, fam["N"])
    unit = _unit(fam["log2_eps1"])
    Js = [np.array(m["J"], dtype=np.int64).reshape(-1, 4) for m in fam["members"]]
    stored = {(int(r[0]), int(r[1])): bool(r[2]) for r in _read_rows(out / "margins.csv")}
    problems = []
    for a in range(len(Js)):
        for b in range(a + 1, len(Js)):
            cert, _ = pair_certificate(ctx, Js[a], Js[b], unit)
            ok = bool(cert is not None and cert.certified)
            if stored.get((a, b)) and not ok:
                problems.append(f"pair ({a}, {b}) is not certified on recheck")
    return problems


def _read_rows(path) -> list:
    import csv

    with Path(path).open() as fh:
        rows = list(csv.reader(fh))[1:]
    return [(r[0], r[1], r[2] == "true") for r in rows]


# ---------------------------------------------------------------------------
# complexity


def _encoder(args, pair):
    name = args.encoder
    if name == "raw_grid":
        return lambda e: cx.raw_grid_for_pair(pair, e)
    if name == "ifs_poly":
        return lambda e: cx.encode_ifs_poly(pair, e)
    if name == "ifs_analytic":
        return lambda e: cx.encode_ifs_analytic(pair, e)
    if name == "comb":
        return cx.encode_lebesgue_comb
    if name == "bernoulli":
        mu = bernoulli_measure(pair, args.level)
        return lambda e: cx.encode_measure(mu, e)
    raise ConfigError(f"unknown encoder {name!r}")


def cmd_complexity(args, out: Path) -> list:
    pair = _pair_artifact(args, out)
    schedule = parse_schedule(args.eps)
    enc = _encoder(args, pair)
    rows, envelopes = [], []
    for e in schedule:
        try:
            d = enc(e)
            rows.append((e, d.bit_len, True, "CERTIFIED"))
            envelopes.append(d.to_json())
        except CertificationFailure as exc:
            rows.append((e, -1, False, f"FAILED: {exc}"))
            envelopes.append(None)
    io.write_csv(out / "growth.csv", rows, ["eps", "bits", "certified", "status"])
    io.write_json(out / "descriptions.json", envelopes)
    good = [(e, b) for e, b, ok, _ in rows if ok]
    fits = {"rows": len(good)}
    if len(good) >= 5:
        curve = cx.fit_growth(good)
        fits.update({"fits": curve.fits, "preferred": curve.preferred})
    io.write_json(out / "fits.json", fits)
    return ["pair.json", "growth.csv", "descriptions.json", "fits.json"]


def recheck_complexity(out: Path, manifest: dict) -> list:
    from .ifs_core import IfsPair

    cfg = manifest["config"]
    pair = IfsPair.from_json(io.read_json(out / "pair.json"))
    problems = []
    for env in io.read_json(out / "descriptions.json"):
        if env is None:
            continue
        desc = cx.EncodedDescription.from_json(env)
        try:
            got = cx.decode(desc)
        except DecodeError as exc:
            problems.append(f"eps {desc.eps:g}: {exc}")
            continue
        eps = desc.eps
        if cfg["encoder"] in ("raw_grid", "ifs_poly", "ifs_analytic"):
            n = approx_depth(pair, eps / 2) + REFERENCE_EXTRA_DEPTH
            dist = hausdorff(got, endpoint_set(pair, n, max_depth=max(n, 24))) + pair.rho**n
        elif cfg["encoder"] == "comb":
            from .metrics import kantorovich_to_uniform

            dist = kantorovich_to_uniform(got)
        else:
            dist = kantorovich_1d(bernoulli_measure(pair, cfg["level"]), got)
        if not dist <= eps:
            problems.append(f"eps {eps:g}: decoded description is {dist:g} away")
    return problems


# ---------------------------------------------------------------------------
# hyper


def _system(args):
    over = {}
    for key in ("k", "lambda_plus", "lambda_minus"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    try:
        return hy.get_system(args.system, **over)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_hyper(args, out: Path) -> list:
    system = _system(args)
    io.write_json(out / "system.json", system.to_json())
    oracle = hy.orbit_oracle(system, args.burn_in, args.samples, args.seed)
    io.write_cloud(out / "oracle.csv", oracle.points)
    outputs = ["system.json", "oracle.csv"]
    certs, rows, envelopes = [], [], []
    for i, eps in enumerate(parse_schedule(args.eps)):
        run = hy.run_pipeline(system, eps, oracle, margin=args.margin, mode=args.mode,
                              lattice_cap=args.lattice_cap)
        name = f"output_{i}.csv"
        io.write_cloud(out / name, run.result.points)
        outputs.append(name)
        c = run.certificate.to_json()
        c.update({"output": name, "m": run.m, "delta": run.delta,
                  "centers": int(run.result.plan.centers.shape[0]),
                  "lattice_points": run.result.lattice_points, "mode": run.result.mode,
                  "remainder_bound": run.result.remainder_bound})
        certs.append(c)
        bits = run.description.bit_len if run.description else -1
        rows.append((eps, bits, run.m, run.certificate.certified))
        envelopes.append(run.description.to_json() if run.description else None)
    dim, counts = hy.box_count_dimension(oracle.points, period=system.period)
    io.write_json(out / "certificates.json", {
        "oracle": {"samples": args.samples, "burn_in": args.burn_in, "seed": args.seed,
                   "resolution": oracle.resolution, "box_dimension": dim, "box_counts": counts},
        "runs": certs,
    })
    io.write_csv(out / "description.csv", rows, ["eps", "bits", "m", "certified"])
    io.write_json(out / "descriptions.json", envelopes)
    outputs += ["certificates.json", "description.csv", "descriptions.json"]
    if not all(c["certified"] for c in certs):
        _finish(args, out, outputs)
        raise CertificationFailure("a hyperbolic run did not certify")
    return outputs


def recheck_hyper(out: Path, manifest: dict) -> list:
    sysjson = io.read_json(out / "system.json")
    period = sysjson["period"]
    oracle = io.read_csv(out / "oracle.csv")
    stored = io.read_json(out / "certificates.json")
    envs = io.read_json(out / "descriptions.json")
    res = hy.oracle_resolution(oracle, period)
    problems = []
    for c, env in zip(stored["runs"], envs):
        pts = io.read_csv(out / c["output"])
        dist = hausdorff(pts, oracle, period=period)
        if c["certified"] and not dist <= 2 * c["eps"] + res:
            problems.append(f"eps {c['eps']:g}: distance {dist:g} exceeds {2 * c['eps'] + res:g}")
        if env is not None:
            got = cx.decode(cx.EncodedDescription.from_json(env))
            if got.shape != pts.shape or hausdorff(got, pts, period=period) > 1e-12:
                problems.append(f"eps {c['eps']:g}: HYP_JET decode differs from the output cloud")
    return problems


# ---------------------------------------------------------------------------
# parser and dispatch


COMMANDS = {
    "ifs": (cmd_ifs, recheck_ifs),
    "dist": (cmd_dist, recheck_dist),
    "family": (cmd_family, recheck_family),
    "complexity": (cmd_complexity, recheck_complexity),
    "hyper": (cmd_hyper, recheck_hyper),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys override flags")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--recheck", action="store_true", help="re-verify the artifacts in --out")

    p = argparse.ArgumentParser(prog="distortion-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ifs = sub.add_parser("ifs", help="Cantor set generation and validation")
    ifs_sub = ifs.add_subparsers(dest="action", required=True)
    for name in ("approx", "endpoints", "cover", "validate"):
        sp = ifs_sub.add_parser(name, parents=[common])
        sp.add_argument("--pair", default="ternary", help="pair JSON file or 'ternary'")
        if name == "approx":
            sp.add_argument("--eps", default="1e-3")
            sp.add_argument("--point-cap", type=int, default=2**23)
        if name in ("endpoints", "cover"):
            sp.add_argument("--depth", type=int, default=2)

    dist = sub.add_parser("dist", help="distances between clouds or measures")
    dist_sub = dist.add_subparsers(dest="action", required=True)
    for name in ("hausdorff", "w1"):
        sp = dist_sub.add_parser(name, parents=[common])
        sp.add_argument("--a", required=False)
        sp.add_argument("--b", required=False)
        if name == "hausdorff":
            sp.add_argument("--period", default=None, help="comma list, 'none' for open axes")
        else:
            sp.add_argument("--method", choices=["auto", "1d", "lp"], default="auto")

    fam = sub.add_parser("family", parents=[common], help="separated family construction")
    fam.add_argument("--pair", default="ternary")
    fam.add_argument("--eps0", default="2^-4")
    fam.add_argument("--log2-eps1", type=float, default=-40.0)
    fam.add_argument("--N", type=int, default=None)
    fam.add_argument("--count", type=int, default=16)
    fam.add_argument("--seed", type=int, default=0)
    fam.add_argument("--refine", type=float, nargs=3, metavar=("K", "GAMMA", "STAGES"), default=None)

    com = sub.add_parser("complexity", parents=[common], help="description-length growth curves")
    com.add_argument("--encoder", default="ifs_poly",
                     choices=["raw_grid", "ifs_poly", "ifs_analytic", "comb", "bernoulli"])
    com.add_argument("--pair", default="ternary")
    com.add_argument("--eps", default="4:10", help="'a:b' for 2^-a..2^-b or a comma list")
    com.add_argument("--level", type=int, default=6, help="Bernoulli level")

    hyp = sub.add_parser("hyper", parents=[common], help="hyperbolic attractor pipeline")
    hyp.add_argument("--system", default="skinny_baker", choices=sorted(hy.SYSTEMS))
    hyp.add_argument("--eps", default="4:6")
    hyp.add_argument("--margin", type=float, default=0.2)
    hyp.add_argument("--mode", choices=[hy.TAYLOR_JET, hy.EXACT_MAP], default=hy.TAYLOR_JET)
    hyp.add_argument("--samples", type=int, default=100_000)
    hyp.add_argument("--burn-in", type=int, default=1000)
    hyp.add_argument("--seed", type=int, default=0)
    hyp.add_argument("--lattice-cap", type=int, default=hy.DEFAULT_LATTICE_CAP)
    hyp.add_argument("--k", type=int, default=None)
    hyp.add_argument("--lambda-plus", type=float, default=None)
    hyp.add_argument("--lambda-minus", type=float, default=None)
    return p


def _apply_config(args, parser) -> None:
    if not args.config:
        return
    try:
        cfg = io.read_json(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("command", "action", "config"):
            raise ConfigError(f"unknown config key {key!r}")
        setattr(args, attr, value)


def _config_record(args) -> dict:
    skip = {"config", "out", "recheck"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _seeds(args) -> dict:
    return {"seed": args.seed} if hasattr(args, "seed") else {}


def _inputs(args) -> dict:
    inputs = {}
    for key in ("pair", "a", "b", "config"):
        v = getattr(args, key, None)
        if v and v != "ternary":
            inputs[key] = v
    return inputs


def _finish(args, out: Path, outputs: list) -> None:
    io.write_manifest(out, args.command, _config_record(args), _inputs(args), _seeds(args), outputs)


def _check_inputs(args) -> None:
    if getattr(args, "command", None) == "dist" and not (args.a and args.b):
        raise ConfigError("dist needs --a and --b")
    for key in ("pair", "a", "b"):
        v = getattr(args, key, None)
        if v and v != "ternary" and not Path(v).is_file():
            raise ConfigError(f"--{key}: no such file {v}")


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        _apply_config(args, parser)
        if args.recheck:
            manifest = io.read_json(out / io.MANIFEST)
            problems = COMMANDS[manifest["command"]][1](out, manifest)
            for p in problems:
                print(f"recheck: {p}", file=sys.stderr)
            if problems:
                return EXIT_RECHECK
            print("recheck: ok")
            return 0
        _check_inputs(args)
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command][0](args, out)
        _finish(args, out, outputs)
        print(f"wrote {len(outputs)} files to {out}")
        return 0
    except (ConfigError, NoAdmissibleM, RateSignError, GammaTooSmall, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, ClassEscape, CertificationFailure) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ExponentGapTooSmall as exc:
        print(f"exponent gap too small: {exc}", file=sys.stderr)
        return EXIT_GAP
    except DistortionLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
