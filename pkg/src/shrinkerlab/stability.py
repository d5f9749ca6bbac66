"""Stability quadratic form, admissibility constraints, and instability
certificates.

A certificate of instability is a concrete normal field V with

    <V, H>_e = 0,   integral of V e^{-|X|^2/4} d mu = 0,   Q(V) < 0,

where Q(V) = <V, -L V>_e evaluated in weak form.  Certificates are always
double-checked: closed-form values (product splitting, or the curve-integral
reductions on the Lagrangian examples) against the generic weak form on the
full grid.  Trial-space verdicts are Galerkin-restricted Rayleigh minima and
are explicitly labelled as such: no finite computation exhausts all smooth
fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .catalog import Shrinker, product_shrinker
from .errors import (CaseNotCovered, CertificateFailed, GridMismatch,
                     ZeroMeanCurvature)
from .functional import as_geometry, lperp_pairing_weak, weighted_inner, _field_on
from .geometry import (GridGeometry, NormalField, mean_curvature_jets,
                       normal_covariant_derivative)
from .profile_curves import (curve_integral, lagrangian_sign_profile,
                             select_w0, unit_tangent_field, variation_field)

EPS_Q = 1e-6
EPS_C = 1e-7


@dataclass
class ConstraintResiduals:
    h_pairing: float
    translation_pairing: np.ndarray
    tolerance: float

    @property
    def admissible(self) -> bool:
        return (abs(self.h_pairing) <= self.tolerance
                and np.linalg.norm(self.translation_pairing) <= self.tolerance)

    def to_dict(self) -> dict:
        return {"h_pairing": float(self.h_pairing),
                "translation_pairing": [float(v) for v in
                                        self.translation_pairing],
                "tolerance": float(self.tolerance),
                "admissible": bool(self.admissible)}


@dataclass
class Decomposition:
    a: float
    z: np.ndarray
    V0: NormalField
    gram_flag: str = "ok"      # "singular_pseudoinverse" when G was cut off
    gram_condition: float = 1.0


@dataclass
class StabilityReport:
    Q_value: float
    residuals: ConstraintResiduals
    verdict: str               # unstable_certificate | stable_on_trial_space | inconclusive
    certificate_field: str
    mode: str = ""
    trial_space_dim: int | None = None
    tolerances: dict = field(default_factory=lambda: {"eps_Q": EPS_Q,
                                                      "eps_c": EPS_C})
    grid_meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "mode": self.mode,
            "Q": float(self.Q_value),
            "residuals": self.residuals.to_dict(),
            "verdict": self.verdict,
            "certificate_field": self.certificate_field,
            "tolerances": self.tolerances,
            "grid_meta": self.grid_meta,
        }
        if self.trial_space_dim is not None:
            out["trial_space_dim"] = int(self.trial_space_dim)
        out.update(self.extras)
        return out


def constraint_tolerance(geom: GridGeometry, eps_c: float = EPS_C) -> float:
    return eps_c * max(1.0, geom.weighted_area)


def quadratic_form_Q(shrinker_or_geom, V) -> float:
    """Q(V) = integral of (|grad V|^2 - |<A,V>|^2 - |V|^2/2) e^{-|X|^2/4}."""
    geom = as_geometry(shrinker_or_geom)
    nf = _field_on(geom, V)
    return lperp_pairing_weak(geom, nf, nf)


def constraint_residuals(shrinker_or_geom, V,
                         eps_c: float = EPS_C) -> ConstraintResiduals:
    geom = as_geometry(shrinker_or_geom)
    nf = _field_on(geom, V)
    h_pair = geom.integrate_weighted(
        np.einsum("ac,ac->a", geom.mean_curvature, nf.values))
    trans = geom.integrate_weighted(nf.values)
    return ConstraintResiduals(h_pairing=float(h_pair),
                               translation_pairing=np.asarray(trans),
                               tolerance=constraint_tolerance(geom, eps_c))


def translation_gram(geom: GridGeometry) -> np.ndarray:
    """G_{bd} = <E_b^perp, E_d^perp>_e; since the projector is symmetric and
    idempotent this is the weighted integral of its entries."""
    return geom.integrate_weighted(geom.normal_projector)


def decompose(shrinker_or_geom, V, svd_cutoff=1e-12) -> Decomposition:
    """Split V = a H + z^perp + V0 with V0 weighted-orthogonal to H and to
    every translation field."""
    geom = as_geometry(shrinker_or_geom)
    nf = _field_on(geom, V)
    H = geom.mean_curvature
    hh = float(geom.integrate_weighted(np.einsum("ac,ac->a", H, H)))
    if hh > 1e-14:
        a = float(geom.integrate_weighted(
            np.einsum("ac,ac->a", H, nf.values))) / hh
    else:
        a = 0.0
    rem = nf.values - a * H
    p = geom.integrate_weighted(rem)        # <V - aH, E_b^perp>_e
    G = translation_gram(geom)
    sv = np.linalg.svd(G, compute_uv=False)
    cond = float(sv[0] / max(sv[-1], 1e-300))
    flag = "ok"
    if cond > 1e12:
        flag = "singular_pseudoinverse"
    z = np.linalg.pinv(G, rcond=svd_cutoff) @ p
    zperp = np.einsum("acd,d->ac", geom.normal_projector, z)
    V0 = NormalField(values=rem - zperp)
    return Decomposition(a=a, z=z, V0=V0, gram_flag=flag, gram_condition=cond)


# ----------------------------------------------------------------------
# Product certificates
# ----------------------------------------------------------------------

def _factor_h_field(shr: Shrinker):
    H, dH = mean_curvature_jets(shr.chart, shr.grid.nodes)
    return H, dH


def product_mean_curvature_field(prod: Shrinker, a: float, b: float) -> NormalField:
    """The field (a H_1, b H_2) on a product grid, with analytic derivatives."""
    s1, s2 = prod.factors
    H1, dH1 = _factor_h_field(s1)
    H2, dH2 = _factor_h_field(s2)
    n1, n2 = s1.grid.node_count, s2.grid.node_count
    m1 = s1.m
    m = prod.m
    d = prod.geom.dim
    d1 = s1.geom.dim

    values = np.zeros((n1, n2, m))
    values[:, :, :m1] = a * H1[:, None, :]
    values[:, :, m1:] = b * H2[None, :, :]
    dvals = np.zeros((n1, n2, d, m))
    dvals[:, :, :d1, :m1] = a * dH1[:, None, :, :]
    dvals[:, :, d1:, m1:] = b * dH2[None, :, :, :]
    return NormalField(values=values.reshape(n1 * n2, m),
                       d_values=dvals.reshape(n1 * n2, d, m))


def certify_product_instability(s1: Shrinker, s2: Shrinker, eps_q=EPS_Q,
                                eps_c=EPS_C, agreement_tol=1e-6,
                                prod: Shrinker | None = None) -> StabilityReport:
    """Instability certificate for a product of closed shrinkers.

    V = (a H_1, b H_2) with a I_1 J_2 + b J_1 I_2 = 0, where
    I_i = <H_i, H_i>_e and J_i is the weighted area of the factor; then
    Q(V) = -a^2 I_1 J_2 - b^2 J_1 I_2 < 0.  The closed split form is
    cross-checked against the generic weak form on the product grid.
    """
    for s in (s1, s2):
        if not s.closed:
            raise CaseNotCovered(
                f"product certificate needs closed factors, {s.name} is not")
    I1 = weighted_inner(s1.geom, s1.geom.mean_curvature, s1.geom.mean_curvature)
    I2 = weighted_inner(s2.geom, s2.geom.mean_curvature, s2.geom.mean_curvature)
    J1 = s1.geom.weighted_area
    J2 = s2.geom.weighted_area
    if I1 <= 1e-12 * max(J1, 1.0) or I2 <= 1e-12 * max(J2, 1.0):
        raise ZeroMeanCurvature(
            "a factor has numerically vanishing mean curvature "
            f"(I1={I1:.3e}, I2={I2:.3e})")

    a, b = I2 * J1, -I1 * J2
    scale = max(abs(a), abs(b))
    a, b = a / scale, b / scale
    Q_closed = -(a ** 2) * I1 * J2 - (b ** 2) * J1 * I2

    if prod is None:
        prod = product_shrinker(s1, s2)
    V = product_mean_curvature_field(prod, a, b)
    Q_generic = quadratic_form_Q(prod, V)
    if abs(Q_generic - Q_closed) > agreement_tol * abs(Q_closed):
        raise CertificateFailed(
            f"split form {Q_closed:.8e} and weak form {Q_generic:.8e} disagree")

    res = constraint_residuals(prod, V, eps_c=eps_c)
    verdict = "unstable_certificate" if (Q_generic < -eps_q and res.admissible) \
        else "inconclusive"
    if verdict != "unstable_certificate":
        raise CertificateFailed(
            f"product certificate failed: Q={Q_generic:.3e}, "
            f"residuals admissible={res.admissible}")
    return StabilityReport(
        Q_value=Q_generic, residuals=res, verdict=verdict, mode="product",
        certificate_field=f"(a H1, b H2), a={a:.6g}, b={b:.6g}",
        tolerances={"eps_Q": eps_q, "eps_c": eps_c,
                    "agreement_tol": agreement_tol},
        grid_meta=prod.grid.meta(),
        extras={"Q_closed_form": Q_closed,
                "factor_integrals": {"I1": I1, "I2": I2, "J1": J1, "J2": J2},
                "shrinker_spec": prod.spec})


# ----------------------------------------------------------------------
# Lagrangian-example certificates
# ----------------------------------------------------------------------

def certify_anciaux_instability(shrinker, mode: str = "general", eps_q=EPS_Q,
                                eps_c=EPS_C, agreement_tol=1e-4) -> StabilityReport:
    """Instability certificates for the closed Lagrangian examples.

    mode "general": V = J(gamma w) with w the unit tangent of the great
    circle (n = 2) or the minimizing coordinate projection (n >= 3).
    mode "lagrangian": V = r^{-2} J(gamma w) with the same w; for 2 < n < 7
    the argument needs E in [E_max/sqrt(2), E_max], otherwise CaseNotCovered.

    Q is computed both by the closed curve-integral form and by the generic
    weak form on the product grid; the two must agree to ``agreement_tol``
    relative.
    """
    if not hasattr(shrinker, "curve"):
        raise CaseNotCovered("certificate requires an assembled Lagrangian "
                             "shrinker with its profile curve")
    if mode not in ("general", "lagrangian"):
        raise ValueError(f"unknown mode {mode!r}")
    curve = shrinker.curve
    n = shrinker.n
    E, Emax = shrinker.meta["E"], shrinker.meta["E_max"]

    sign_profile = None
    if mode == "lagrangian":
        if 2 < n < 7 and not (E >= Emax / math.sqrt(2.0) - 1e-12):
            raise CaseNotCovered(
                f"Lagrangian-variation certificate for n={n} needs "
                f"E >= E_max/sqrt(2) = {Emax/math.sqrt(2):.6g}, got E={E:.6g}")
        if n >= 3:
            st = curve.states(np.linspace(0.0, curve.length, 2048,
                                          endpoint=False))
            sign_profile = lagrangian_sign_profile(n, st[:, 1])
            if sign_profile.min() < -1e-9 or sign_profile.max() <= 0.0:
                raise CertificateFailed(
                    f"sign profile violates nonnegativity: "
                    f"min={sign_profile.min():.3e}, max={sign_profile.max():.3e}")

    sigma_res = shrinker.grid.shape[1]
    if n == 2:
        w = unit_tangent_field(shrinker.psi, resolution=sigma_res)
    else:
        w = select_w0(shrinker.psi, resolution=sigma_res)
    family = "N0" if mode == "general" else "N1"
    V = variation_field(shrinker, w, family)

    power = n - 1 if family == "N0" else n - 5
    c1 = curve_integral(curve, lambda r, d, p:
                        (0.5 * r ** 2 - 2.0 + 4.0 * np.sin(d) ** 2)
                        * np.exp(-r ** 2 / 4.0) * r ** power)
    c2 = curve_integral(curve, lambda r, d, p:
                        np.exp(-r ** 2 / 4.0) * r ** power)
    Q_closed = -c1 * w.integrals["norm_sq"] + c2 * w.integrals["f"]
    Q_generic = quadratic_form_Q(shrinker, V)
    if abs(Q_generic - Q_closed) > agreement_tol * abs(Q_closed):
        raise CertificateFailed(
            f"closed form {Q_closed:.8e} and weak form {Q_generic:.8e} "
            f"disagree beyond {agreement_tol:g} relative")

    res = constraint_residuals(shrinker, V, eps_c=eps_c)
    if Q_generic >= -eps_q or not res.admissible:
        raise CertificateFailed(
            f"certificate failed: Q={Q_generic:.3e}, admissible={res.admissible}")
    extras = {
        "Q_closed_form": Q_closed,
        "curve": {"E": E, "E_max": Emax, "pieces": curve.pieces,
                  "rotation_index": curve.rotation_index,
                  "closure_gap": curve.closure_gap},
        "tangent_field": {"label": w.label, "symmetric": bool(w.symmetric),
                          **{k: v for k, v in w.integrals.items()
                             if isinstance(v, float)}},
        "shrinker_spec": shrinker.spec,
    }
    if sign_profile is not None:
        extras["sign_profile"] = {"min": float(sign_profile.min()),
                                  "max": float(sign_profile.max())}
    return StabilityReport(
        Q_value=Q_generic, residuals=res, verdict="unstable_certificate",
        mode=mode, certificate_field=f"{family}:{w.label}",
        tolerances={"eps_Q": eps_q, "eps_c": eps_c,
                    "agreement_tol": agreement_tol},
        grid_meta=shrinker.grid.meta(), extras=extras)


# ----------------------------------------------------------------------
# Galerkin trial-space verdicts
# ----------------------------------------------------------------------

def stability_verdict_on_trial_space(shrinker_or_geom, basis, eps_q=EPS_Q,
                                     eps_c=EPS_C) -> StabilityReport:
    """Minimum Rayleigh value of Q over the admissible part of a trial span.

    The span is deduplicated through the weighted mass matrix, projected onto
    the null space of the two admissibility constraints, and the restricted
    symmetric pencil is solved.  A negative direction is materialized and
    re-verified directly through quadratic_form_Q before an instability
    verdict is issued.
    """
    geom = as_geometry(shrinker_or_geom)
    fields = [_field_on(geom, V) for V in basis]
    k = len(fields)
    if k == 0:
        raise ValueError("empty trial basis")
    for nf in fields:
        if nf.values.shape[0] != geom.node_count:
            raise GridMismatch("trial field on a different grid")

    mass = np.empty((k, k))
    form = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            mass[i, j] = mass[j, i] = weighted_inner(geom, fields[i], fields[j])
            form[i, j] = form[j, i] = lperp_pairing_weak(geom, fields[i],
                                                         fields[j])

    H = geom.mean_curvature
    c_h = np.array([geom.integrate_weighted(
        np.einsum("ac,ac->a", H, nf.values)) for nf in fields])
    c_tr = np.stack([geom.integrate_weighted(nf.values) for nf in fields])
    constraints = np.column_stack([c_h, c_tr])          # (k, m+1)

    # Deduplicate the span.
    evals, evecs = scipy.linalg.eigh(mass)
    keep = evals > 1e-12 * evals.max()
    rank_deficient = bool(np.any(~keep))
    B = evecs[:, keep] / np.sqrt(evals[keep])           # (k, k') mass-orthonormal

    # Admissible subspace: null space of the constraints within the span.
    A = B.T @ constraints                               # (k', m+1)
    scale = max(1.0, geom.weighted_area)
    u, sv, _ = np.linalg.svd(A, full_matrices=True)
    null_mask = np.ones(B.shape[1], dtype=bool)
    null_mask[:len(sv)] = sv <= 1e-9 * scale
    N = u[:, null_mask]                                 # (k', d)
    d = N.shape[1]
    meta = as_geometry(shrinker_or_geom).grid.meta()
    flags = {"rank_deficient_basis": rank_deficient,
             "span_dim": int(B.shape[1]), "basis_size": k}
    if d == 0:
        return StabilityReport(
            Q_value=float("nan"),
            residuals=ConstraintResiduals(0.0, np.zeros(geom.ambient_dim),
                                          constraint_tolerance(geom, eps_c)),
            verdict="stable_on_trial_space", mode="trial_space",
            certificate_field="", trial_space_dim=0,
            tolerances={"eps_Q": eps_q, "eps_c": eps_c},
            grid_meta=meta, extras=flags)

    form_r = N.T @ (B.T @ form @ B) @ N
    form_r = 0.5 * (form_r + form_r.T)
    evals_r, evecs_r = scipy.linalg.eigh(form_r)        # mass restricted = I
    lam = float(evals_r[0])
    coeff = B @ (N @ evecs_r[:, 0])                     # back to input basis

    vmin = NormalField(
        values=sum(c * nf.values for c, nf in zip(coeff, fields)),
        cov=sum(c * nf.cov for c, nf in zip(coeff, fields)))
    res = constraint_residuals(geom, vmin, eps_c=eps_c)
    q_direct = quadratic_form_Q(geom, vmin)

    if lam < -eps_q and q_direct < -eps_q and res.admissible:
        verdict = "unstable_certificate"
    elif lam >= -eps_q:
        verdict = "stable_on_trial_space"
    else:
        verdict = "inconclusive"
    return StabilityReport(
        Q_value=lam, residuals=res, verdict=verdict, mode="trial_space",
        certificate_field="galerkin_minimizer", trial_space_dim=d,
        tolerances={"eps_Q": eps_q, "eps_c": eps_c},
        grid_meta=meta,
        extras={**flags, "Q_direct_reverified": float(q_direct)})


def sphere_trial_basis(shrinker: Shrinker, max_degree: int = 3):
    """Normal trial fields f(X) X/R on a round sphere, f over all monomials
    of degree <= max_degree in the ambient coordinates (with analytic
    derivatives).  Dimension 20 for S^2 with cubics."""
    from itertools import combinations_with_replacement

    geom = shrinker.geom
    X = geom.position
    tan = geom.tangent_basis
    R = float(np.linalg.norm(X[0]))
    m = geom.ambient_dim
    nu = X / R
    dnu = tan / R

    basis = []
    for deg in range(max_degree + 1):
        for combo in combinations_with_replacement(range(m), deg):
            f = np.ones(geom.node_count)
            for c in combo:
                f = f * X[:, c]
            df = np.zeros((geom.node_count, geom.dim))
            for pos in range(deg):
                g = np.ones(geom.node_count)
                for q, c in enumerate(combo):
                    if q != pos:
                        g = g * X[:, c]
                df += g[:, None] * tan[:, :, combo[pos]]
            values = f[:, None] * nu
            dvals = df[:, :, None] * nu[:, None, :] + f[:, None, None] * dnu
            basis.append(normal_covariant_derivative(
                geom, NormalField(values=values, d_values=dvals)))
    return basis


def dump_integrand_csv(shrinker_or_geom, V, path):
    """Per-node CSV of the stability integrand pieces, for external plotting."""
    geom = as_geometry(shrinker_or_geom)
    nf = _field_on(geom, V)
    from .geometry import gradient_norm_sq, second_form_pairing_sq

    grad = gradient_norm_sq(geom, nf.cov)
    pair = second_form_pairing_sq(geom, nf.values)
    vv = np.einsum("ac,ac->a", nf.values, nf.values)
    w = geom.area_weights * geom.gauss_density
    rows = np.column_stack([geom.grid.nodes, grad, pair, vv, w,
                            (grad - pair - 0.5 * vv) * w])
    params = ",".join(f"u{i}" for i in range(geom.dim))
    header = f"{params},grad_sq,pairing_sq,norm_sq,weight,weighted_integrand"
    np.savetxt(path, rows, delimiter=",", header=header, comments="")
