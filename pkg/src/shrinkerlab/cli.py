"""Command-line interface.

Exit codes are a stable contract:
    0  success / instability certificate found
    1  verification failure
    2  usage error (bad flags, unknown catalog name, malformed spec)
    3  case not covered by the requested certificate
    4  no root in the shooting bracket

Reports are JSON with sorted keys and no timestamps, so identical
configuration and seed produce byte-identical output.  Files are written
atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import catalog
from .errors import (CaseNotCovered, CertificateFailed, InvalidSpec, NoRoot,
                     ShrinkerError, UnknownName)
from .functional import (VariationData, evaluate_F, fd_variation,
                         first_variation, second_variation_general,
                         weighted_inner)
from .geometry import random_normal_field, scalar_script_L, shrinker_residual

SCHEMA_VERSION = 1


def emit(report: dict, path=None, stream=None):
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if path:
        directory = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    else:
        (stream or sys.stdout).write(text)


def _spec_from_args(args) -> dict:
    spec = catalog.resolve_spec(args.spec)
    if getattr(args, "n", None) is not None:
        spec["n"] = args.n
    return spec


# ----------------------------------------------------------------------
# catalog
# ----------------------------------------------------------------------

def cmd_catalog(args) -> int:
    if args.action == "list":
        report = {"schema_version": SCHEMA_VERSION,
                  "catalog": {name: spec for name, spec
                              in sorted(catalog.NAMED_SPECS.items())}}
        emit(report, args.output)
        return 0
    spec = _spec_from_args(args)
    kind = spec.get("kind")
    desc = {"schema_version": SCHEMA_VERSION, "spec": spec}
    if kind == "sphere":
        n = int(spec["n"])
        desc["dim"] = n
        desc["ambient_dim"] = n + 1 + int(spec.get("ambient_pad", 0))
        desc["radius"] = spec.get("radius", math.sqrt(2.0 * n))
    elif kind == "anciaux":
        n = int(spec["n"])
        desc["dim"] = n
        desc["ambient_dim"] = 2 * n
    emit(desc, args.output)
    return 0


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------

def _check(name, value, tol):
    return {"check": name, "value": float(value), "tolerance": float(tol),
            "passed": bool(abs(value) <= tol)}


def run_verification(shr, rng_seed: int = 0) -> list:
    """Self-shrinker residual, drift-operator identities, weighted integral
    identities, and eigen-identity spot checks on a built object."""
    geom = shr.geom
    n = shr.n
    rng = np.random.default_rng(rng_seed)
    checks = []

    res = float(np.linalg.norm(shrinker_residual(geom), axis=1).max())
    checks.append(_check("max_shrinker_residual", res,
                         1e-6 if shr.spec.get("kind") == "anciaux" else 1e-10))

    # Second-derivative stencils carry an O(h^2) truncation error; scale the
    # identity tolerances with the coarsest non-spectral axis spacing.
    h_sq = 0.0
    for ax, nodes in zip(shr.chart.axes, shr.grid.axis_nodes):
        if ax.periodic and ax.spectral:
            continue
        gaps = np.diff(nodes)
        if ax.periodic:
            h_sq = max(h_sq, float(gaps.max()) ** 2)
        else:
            h_sq = max(h_sq, float(gaps.max()) ** 2)
    tol2 = max(1e-8, 0.5 * h_sq)

    X = geom.position
    xsq = np.einsum("ac,ac->a", X, X)
    dxsq = 2.0 * np.einsum("ac,aic->ai", X, geom.tangent_basis)
    lf = scalar_script_L(geom, xsq, df=dxsq)
    checks.append(_check("drift_operator_xsq", np.abs(lf - (2 * n - xsq)).max(),
                         tol2))
    i0 = int(rng.integers(0, geom.ambient_dim))
    lxi = scalar_script_L(geom, X[:, i0], df=geom.tangent_basis[:, :, i0])
    checks.append(_check(f"drift_operator_x{i0}",
                         np.abs(lxi + 0.5 * X[:, i0]).max(), tol2))

    scale = max(1.0, geom.weighted_area)
    checks.append(_check("weighted_first_moment",
                         np.linalg.norm(geom.integrate_weighted(X)), 1e-6 * scale))
    checks.append(_check("weighted_cubic_moment",
                         np.linalg.norm(geom.integrate_weighted(
                             X * xsq[:, None])), 1e-5 * scale))
    checks.append(_check("weighted_xsq_balance",
                         geom.integrate_weighted(xsq - 2.0 * n), 1e-6 * scale))
    W = rng.standard_normal(geom.ambient_dim)
    xw = X @ W
    wt = np.einsum("aic,c->ai", geom.tangent_basis, W)
    wtop_sq = np.einsum("aij,ai,aj->a", geom.inverse_metric, wt, wt)
    checks.append(_check("weighted_direction_second_moment",
                         geom.integrate_weighted(xw ** 2 - 2.0 * wtop_sq),
                         1e-6 * scale * (W @ W)))
    checks.append(_check("weighted_mean_curvature_moment",
                         np.linalg.norm(geom.integrate_weighted(
                             geom.mean_curvature)), 1e-6 * scale))

    H = geom.mean_curvature
    hh = weighted_inner(geom, H, H)
    if hh > 1e-10:
        from .functional import lperp_pairing_weak
        from .geometry import mean_curvature_field
        qh = lperp_pairing_weak(geom, mean_curvature_field(geom),
                                mean_curvature_field(geom))
        checks.append(_check("eigen_identity_H", (qh + hh) / hh, 1e-5))
    y = rng.standard_normal(geom.ambient_dim)
    from .functional import lperp_pairing_weak
    from .geometry import constant_vector_projection_field
    yf = constant_vector_projection_field(geom, y)
    yy = weighted_inner(geom, yf, yf)
    if yy > 1e-10:
        qy = lperp_pairing_weak(geom, yf, yf)
        checks.append(_check("eigen_identity_translation",
                             (qy + 0.5 * yy) / yy, 1e-5))

    if hasattr(shr, "curve"):
        from .profile_curves import (inverse_square_balance_residual,
                                     radial_balance_residual)
        checks.append(_check("lagrangian_condition",
                             shr.meta["lagrangian_defect"], 1e-8))
        checks.append(_check("metric_block_structure",
                             shr.meta["metric_block_error"], 1e-8))
        checks.append(_check("curve_radial_balance",
                             radial_balance_residual(shr.curve), 1e-6))
        checks.append(_check("curve_inverse_square_balance",
                             inverse_square_balance_residual(shr.curve), 1e-6))
        checks.append(_check("curve_conservation",
                             shr.curve.conservation_residual(), 1e-9))
    return checks


def cmd_verify(args) -> int:
    spec = _spec_from_args(args)
    shr = catalog.build(spec, resolution=args.resolution, residual_tol=np.inf)
    checks = run_verification(shr, rng_seed=args.seed)
    passed = all(c["passed"] for c in checks)
    report = {"schema_version": SCHEMA_VERSION, "spec": spec,
              "grid": shr.grid.meta(), "checks": checks,
              "passed": passed, "seed": args.seed}
    if not passed:
        report["first_failure"] = next(c["check"] for c in checks
                                       if not c["passed"])
    emit(report, args.output)
    return 0 if passed else 1


# ----------------------------------------------------------------------
# certify
# ----------------------------------------------------------------------

def cmd_certify(args) -> int:
    from . import stability

    spec = _spec_from_args(args)
    shr = catalog.build(spec, resolution=args.resolution)
    kind = spec.get("kind")
    if kind == "product":
        report = stability.certify_product_instability(*shr.factors, prod=shr)
    elif kind == "anciaux":
        report = stability.certify_anciaux_instability(shr, mode=args.mode)
    else:
        raise CaseNotCovered(
            f"no instability certificate is defined for kind {kind!r}")
    payload = report.to_dict()
    payload["schema_version"] = SCHEMA_VERSION
    payload["spec"] = spec
    emit(payload, args.output)
    return 0 if report.verdict == "unstable_certificate" else 1


# ----------------------------------------------------------------------
# anciaux solve
# ----------------------------------------------------------------------

def cmd_anciaux(args) -> int:
    from . import profile_curves as pc

    if args.action != "solve":
        raise InvalidSpec(f"unknown anciaux action {args.action!r}")
    n = args.n
    if args.pieces is None or args.index is None:
        curve = pc.circle_profile(n)
    else:
        bracket = args.bracket
        if bracket is None:
            bracket = (0.02 * pc.e_max(n), 0.999 * pc.e_max(n))
        elif bracket[0] >= bracket[1]:
            raise UsageError(
                f"bracket must satisfy lo < hi, got {bracket}")
        curve = pc.shoot_closed(n, args.index, args.pieces, bracket)
    if args.csv:
        curve.export_csv(args.csv)
    report = {"schema_version": SCHEMA_VERSION, "summary": curve.summary()}
    emit(report, args.output)
    return 0


# ----------------------------------------------------------------------
# f-eval and variation
# ----------------------------------------------------------------------

def cmd_f_eval(args) -> int:
    spec = _spec_from_args(args)
    shr = catalog.build(spec, resolution=args.resolution)
    x = None if args.x is None else np.asarray(args.x, dtype=float)
    fe = evaluate_F(shr, x=x, t=args.t)
    report = {"schema_version": SCHEMA_VERSION, "spec": spec,
              "grid": shr.grid.meta(), "f": fe.to_dict()}
    emit(report, args.output)
    return 0


def cmd_variation(args) -> int:
    spec = _spec_from_args(args)
    shr = catalog.build(spec, resolution=args.resolution)
    rng = np.random.default_rng(args.seed)
    field = random_normal_field(shr.geom, rng)
    y = rng.standard_normal(shr.m)
    tau = float(rng.standard_normal())
    var = VariationData(V=field.sample(shr.geom), y=y, tau=tau)
    if args.order == 1:
        value = first_variation(shr, var)
    else:
        value = second_variation_general(shr, var)
    report = {"schema_version": SCHEMA_VERSION, "spec": spec, "seed": args.seed,
              "order": args.order, "value": value,
              "y": [float(v) for v in y], "tau": tau,
              "grid": shr.grid.meta()}
    if args.fd_check:
        fd, mismatch = fd_variation(shr.geom, field, field.d1, var, args.order)
        report["fd_value"] = fd
        report["fd_mismatch_estimate"] = mismatch
    emit(report, args.output)
    return 0


class UsageError(Exception):
    pass


def _resolution(value):
    if value is None:
        return None
    parts = [int(v) for v in value.split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


class _Parser(argparse.ArgumentParser):
    """Supports @file arguments holding 'key = value' lines (one per line,
    '#' comments allowed); each line expands to --key value."""

    def convert_arg_line_to_args(self, line):
        line = line.split("#", 1)[0].strip()
        if not line:
            return []
        if "=" in line:
            key, value = (part.strip() for part in line.split("=", 1))
            args = [f"--{key}"]
            if value:
                args.extend(value.split())
            return args
        return line.split()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="shrinkerlab",
        description="Numerical self-shrinkers and F-instability certificates",
        fromfile_prefix_chars="@")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", help="list or show built-in specs")
    c.add_argument("action", choices=["list", "show"])
    c.add_argument("spec", nargs="?", help="catalog name or spec file")
    c.add_argument("--n", type=int, default=None)
    c.add_argument("-o", "--output", default=None)
    c.set_defaults(func=cmd_catalog)

    v = sub.add_parser("verify", help="run the identity suite on a spec")
    v.add_argument("spec", help="catalog name or spec file")
    v.add_argument("--n", type=int, default=None)
    v.add_argument("--resolution", type=_resolution, default=None)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("-o", "--output", default=None)
    v.set_defaults(func=cmd_verify)

    ce = sub.add_parser("certify", help="produce an instability certificate")
    ce.add_argument("spec", help="catalog name or spec file")
    ce.add_argument("--n", type=int, default=None)
    ce.add_argument("--mode", choices=["general", "lagrangian"],
                    default="general")
    ce.add_argument("--resolution", type=_resolution, default=None)
    ce.add_argument("-o", "--output", default=None)
    ce.set_defaults(func=cmd_certify)

    a = sub.add_parser("anciaux", help="profile-curve solver")
    a.add_argument("action", choices=["solve"])
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--pieces", type=int, default=None)
    a.add_argument("--index", type=int, default=None)
    a.add_argument("--bracket", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"))
    a.add_argument("--csv", default=None, help="profile curve CSV path")
    a.add_argument("-o", "--output", default=None)
    a.set_defaults(func=cmd_anciaux)

    f = sub.add_parser("f-eval", help="evaluate the Gaussian area functional")
    f.add_argument("spec")
    f.add_argument("--n", type=int, default=None)
    f.add_argument("--x", type=float, nargs="*", default=None)
    f.add_argument("--t", type=float, default=1.0)
    f.add_argument("--resolution", type=_resolution, default=None)
    f.add_argument("-o", "--output", default=None)
    f.set_defaults(func=cmd_f_eval)

    va = sub.add_parser("variation", help="first or second variation for a "
                                          "seeded random variation")
    va.add_argument("spec")
    va.add_argument("--n", type=int, default=None)
    va.add_argument("--order", type=int, choices=[1, 2], required=True)
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--fd-check", action="store_true")
    va.add_argument("--resolution", type=_resolution, default=None)
    va.add_argument("-o", "--output", default=None)
    va.set_defaults(func=cmd_variation)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoRoot as exc:
        print(f"NoRoot: {exc}", file=sys.stderr)
        return 4
    except CaseNotCovered as exc:
        print(f"CaseNotCovered: {exc}", file=sys.stderr)
        return 3
    except (UnknownName, InvalidSpec, UsageError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (CertificateFailed, ShrinkerError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
