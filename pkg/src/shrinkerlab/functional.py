"""The Gaussian-weighted area functional and its first and second variations.

Conventions: the weighted inner product <V,W>_e integrates <V,W> against
exp(-|X|^2/4) with no (4 pi t)^(-n/2) prefactor; the variation formulas
reintroduce the prefactor explicitly.  Quadratic terms in the stability
operator are always evaluated in weak (integrated-by-parts) form, which only
needs first covariant derivatives of the fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NonpositiveScale, NotCritical
from .geometry import (GridGeometry, NormalField, compute_geometry,
                       connection_laplacian, gradient_norm_sq,
                       normal_covariant_derivative, second_form_pairing_sq,
                       shrinker_residual, tangential_position_components)
from .quadrature import build_grid


def as_geometry(obj) -> GridGeometry:
    """Accept a built shrinker, a GridGeometry, or a (chart, grid) pair."""
    if isinstance(obj, GridGeometry):
        return obj
    if hasattr(obj, "geom"):
        return obj.geom
    if isinstance(obj, tuple) and len(obj) == 2:
        return compute_geometry(*obj)
    raise TypeError(f"cannot interpret {type(obj)!r} as grid geometry")


@dataclass
class FEvaluation:
    value: float
    center: np.ndarray
    scale: float
    grid_order_estimate: float
    truncation_bound: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "center": list(map(float, self.center)),
            "scale": self.scale,
            "grid_order_estimate": self.grid_order_estimate,
            "truncation_bound": self.truncation_bound,
        }


@dataclass
class VariationData:
    """First and second order variation data.

    V is the normal velocity field, (y, tau) the center and scale
    velocities, (y2, tau2) their second derivatives along the family.
    """

    V: NormalField | None
    y: np.ndarray | None = None
    tau: float = 0.0
    y2: np.ndarray | None = None
    tau2: float = 0.0

    def center_velocity(self, m: int) -> np.ndarray:
        return np.zeros(m) if self.y is None else np.asarray(self.y, float)

    def center_acceleration(self, m: int) -> np.ndarray:
        return np.zeros(m) if self.y2 is None else np.asarray(self.y2, float)


def _field_on(geom: GridGeometry, V) -> NormalField:
    if V is None:
        m = geom.ambient_dim
        z = np.zeros((geom.node_count, m))
        return NormalField(values=z, cov=np.zeros((geom.node_count, geom.dim, m)))
    if isinstance(V, NormalField):
        if V.values.shape[0] != geom.node_count:
            raise GridMismatch("field sampled on a different grid")
        if V.cov is None:
            return normal_covariant_derivative(geom, V)
        return V
    V = np.asarray(V, dtype=float)
    if V.shape[0] != geom.node_count:
        raise GridMismatch("field sampled on a different grid")
    return normal_covariant_derivative(geom, V)


def _gauss_weight(geom: GridGeometry, x, t):
    X = geom.position
    diff = X - np.asarray(x, dtype=float)
    dist2 = np.einsum("ac,ac->a", diff, diff)
    return diff, dist2, np.exp(-dist2 / (4.0 * t))


def evaluate_F(shrinker_or_geom, x=None, t=1.0, estimate_order=True) -> FEvaluation:
    """F(Sigma, x, t) = (4 pi t)^(-n/2) * integral of exp(-|X-x|^2/(4t))."""
    geom = as_geometry(shrinker_or_geom)
    t = float(t)
    if t <= 0.0:
        raise NonpositiveScale(f"scale t must be positive, got {t}")
    m = geom.ambient_dim
    n = geom.dim
    x = np.zeros(m) if x is None else np.asarray(x, dtype=float)

    def quad(g: GridGeometry) -> float:
        _, _, w = _gauss_weight(g, x, t)
        return float((4.0 * math.pi * t) ** (-n / 2.0) * np.sum(g.area_weights * w))

    value = quad(geom)

    order_estimate = float("nan")
    if estimate_order:
        half = tuple(max(4, r // 2) for r in geom.grid.resolution)
        coarse = compute_geometry(geom.chart, build_grid(
            geom.chart, half, truncation_radius=geom.grid.truncation_radius))
        order_estimate = abs(value - quad(coarse))

    tail = 0.0
    if geom.grid.truncation_radius is not None:
        tail = _f_tail_bound(geom, x, t)

    return FEvaluation(value=value, center=x, scale=t,
                       grid_order_estimate=order_estimate,
                       truncation_bound=tail)


def _f_tail_bound(geom: GridGeometry, x, t) -> float:
    """First-order bound on the F-mass beyond the truncation radius.

    Exact in structure for flat product factors: each truncated axis loses a
    one-dimensional Gaussian tail; compact directions contribute a bounded
    multiplier recorded at build time.
    """
    from scipy.special import erfc

    R = geom.grid.truncation_radius
    notes = geom.grid.notes
    k_flat = int(notes.get("flat_axes", geom.dim))
    compact_mass = float(notes.get("compact_f_mass", 1.0))
    xr = min(float(np.linalg.norm(np.asarray(x, float))), R)
    per_axis = 0.5 * (erfc((R - xr) / (2.0 * math.sqrt(t)))
                      + erfc((R + xr) / (2.0 * math.sqrt(t))))
    return float(k_flat * per_axis * compact_mass)


def weighted_inner(geom_or_shrinker, V, W) -> float:
    """<V,W>_e: integral of <V,W> exp(-|X|^2/4) d mu."""
    geom = as_geometry(geom_or_shrinker)
    fv = _field_on(geom, V)
    fw = _field_on(geom, W)
    vals = np.einsum("ac,ac->a", fv.values, fw.values)
    return float(geom.integrate_weighted(vals))


def lperp_pairing_weak(geom: GridGeometry, V, W, x=None, t: float = 1.0) -> float:
    """<V, -L^perp W>_e in weak form:

        integral of (<grad V, grad W> - <A,V><A,W># - <V,W>/(2t))
        against exp(-|X-x|^2/(4t)),

    the divergence-theorem identity for the drift operator at center x and
    scale t (x=0, t=1 by default).
    """
    fv = _field_on(geom, V)
    fw = _field_on(geom, W)
    grad = np.einsum("aij,aic,ajc->a", geom.inverse_metric, fv.cov, fw.cov)
    Sv = np.einsum("aijc,ac->aij", geom.second_form, fv.values)
    Sw = np.einsum("aijc,ac->aij", geom.second_form, fw.values)
    pair = np.einsum("aij,akl,aik,ajl->a", Sv, Sw,
                     geom.inverse_metric, geom.inverse_metric)
    dot = np.einsum("ac,ac->a", fv.values, fw.values)
    integrand = grad - pair - dot / (2.0 * t)
    if x is None and t == 1.0:
        return float(geom.integrate_weighted(integrand))
    _, _, w = _gauss_weight(geom, np.zeros(geom.ambient_dim) if x is None else x, t)
    return float(np.sum(geom.area_weights * w * integrand))


def apply_L_perp(geom_or_shrinker, V) -> NormalField:
    """Pointwise stability operator

        L V = Lap^perp V + <A_ij,V> g^{ki} g^{jl} A_kl + V/2
              - (1/2) grad^perp_{X^top} V

    with the connection Laplacian discretized by nested covariant
    differences (analytic first derivatives are used when V carries them).
    """
    geom = as_geometry(geom_or_shrinker)
    nf = _field_on(geom, V)
    lap = connection_laplacian(geom, nf)
    S = np.einsum("aijc,ac->aij", geom.second_form, nf.values)
    Sup = np.einsum("aik,ajl,akl->aij", geom.inverse_metric,
                    geom.inverse_metric, S)
    aterm = np.einsum("aij,aijc->ac", Sup, geom.second_form)
    xtop = tangential_position_components(geom)
    drift = np.einsum("ai,aic->ac", xtop, nf.cov)
    out = lap + aterm + 0.5 * nf.values - 0.5 * drift
    return NormalField(values=out)


def first_variation(shrinker_or_geom, var: VariationData, x0=None,
                    t0: float = 1.0) -> float:
    """dF/ds at s=0 for velocity (V, y, tau) about center x0 and scale t0."""
    geom = as_geometry(shrinker_or_geom)
    t0 = float(t0)
    if t0 <= 0.0:
        raise NonpositiveScale(f"scale t0 must be positive, got {t0}")
    n, m = geom.dim, geom.ambient_dim
    x0 = np.zeros(m) if x0 is None else np.asarray(x0, dtype=float)
    y = var.center_velocity(m)
    nf = _field_on(geom, var.V)

    diff, dist2, w = _gauss_weight(geom, x0, t0)
    integrand = -np.einsum("ac,ac->a", nf.values,
                           geom.mean_curvature + diff / (2.0 * t0))
    integrand += var.tau * (dist2 / (4.0 * t0 ** 2) - n / (2.0 * t0))
    integrand += diff @ y / (2.0 * t0)
    pref = (4.0 * math.pi * t0) ** (-n / 2.0)
    return float(pref * np.sum(geom.area_weights * w * integrand))


def second_variation_at_critical(shrinker_or_geom, var: VariationData,
                                 residual_tol: float = 1e-5) -> float:
    """d2F/ds2 at a critical point (x0, t0) = (0, 1):

        (4 pi)^(-n/2) * integral of ( -<V, L V> - 2 tau <H,V>
            - tau^2 |H|^2 + <V,y> - |y^perp|^2 / 2 ) exp(-|X|^2/4),

    with <V,-LV> in weak form.  Raises NotCritical when the self-shrinker
    residual exceeds ``residual_tol``.
    """
    geom = as_geometry(shrinker_or_geom)
    res = np.linalg.norm(shrinker_residual(geom), axis=1).max()
    if res > residual_tol:
        raise NotCritical(
            f"max shrinker residual {res:.3e} exceeds {residual_tol:.1e}")
    n, m = geom.dim, geom.ambient_dim
    y = var.center_velocity(m)
    nf = _field_on(geom, var.V)

    q = lperp_pairing_weak(geom, nf, nf)
    H = geom.mean_curvature
    hv = geom.integrate_weighted(np.einsum("ac,ac->a", H, nf.values))
    hh = geom.integrate_weighted(np.einsum("ac,ac->a", H, H))
    vy = geom.integrate_weighted(nf.values @ y)
    yperp = np.einsum("acd,d->ac", geom.normal_projector, y)
    yy = geom.integrate_weighted(np.einsum("ac,ac->a", yperp, yperp))

    pref = (4.0 * math.pi) ** (-n / 2.0)
    return float(pref * (q - 2.0 * var.tau * hv - var.tau ** 2 * hh
                         + vy - 0.5 * yy))


def second_variation_general(shrinker_or_geom, var: VariationData, x0=None,
                             t0: float = 1.0) -> float:
    """d2F/ds2 about an arbitrary (x0, t0) for straight-line normal families
    X_s = X + s V (so the family's second position derivative vanishes and
    the <grad^perp_V V, H + (X-x0)/(2 t0)> term drops), with center and
    scale paths x_s = x0 + s y + s^2 y2/2, t_s = t0 + s tau + s^2 tau2/2.
    """
    geom = as_geometry(shrinker_or_geom)
    t0 = float(t0)
    if t0 <= 0.0:
        raise NonpositiveScale(f"scale t0 must be positive, got {t0}")
    n, m = geom.dim, geom.ambient_dim
    x0 = np.zeros(m) if x0 is None else np.asarray(x0, dtype=float)
    y = var.center_velocity(m)
    y2 = var.center_acceleration(m)
    tau, tau2 = var.tau, var.tau2
    nf = _field_on(geom, var.V)

    diff, dist2, w = _gauss_weight(geom, x0, t0)
    V = nf.values
    H = geom.mean_curvature

    fv = -np.einsum("ac,ac->a", V, H + diff / (2.0 * t0)) \
        + tau * (dist2 / (4.0 * t0 ** 2) - n / (2.0 * t0)) \
        + diff @ y / (2.0 * t0)

    integrand = np.einsum("ac,ac->a", diff, V) * tau / t0 ** 2
    integrand += V @ y / t0
    integrand -= (dist2 - n * t0) * tau ** 2 / (2.0 * t0 ** 3)
    integrand -= float(y @ y) / (2.0 * t0)
    integrand -= tau * (diff @ y) / t0 ** 2
    integrand += fv ** 2
    integrand += tau2 * (dist2 / (4.0 * t0 ** 2) - n / (2.0 * t0))
    integrand += diff @ y2 / (2.0 * t0)

    pref = (4.0 * math.pi * t0) ** (-n / 2.0)
    q = lperp_pairing_weak(geom, nf, nf, x=x0, t=t0)
    return float(pref * (q + np.sum(geom.area_weights * w * integrand)))


# ----------------------------------------------------------------------
# Finite-difference oracles along straight-line families
# ----------------------------------------------------------------------

def f_along_family(geom: GridGeometry, field_fn, field_d1, var: VariationData,
                   s: float, x0=None, t0: float = 1.0) -> float:
    """F evaluated on the family member at parameter s."""
    from .charts import perturbed_chart

    m = geom.ambient_dim
    x0 = np.zeros(m) if x0 is None else np.asarray(x0, dtype=float)
    y = var.center_velocity(m)
    y2 = var.center_acceleration(m)
    xs = x0 + s * y + 0.5 * s ** 2 * y2
    ts = t0 + s * var.tau + 0.5 * s ** 2 * var.tau2
    if field_fn is None:
        chart_s = geom.chart
        geom_s = geom if s == 0.0 else compute_geometry(chart_s, geom.grid)
    else:
        chart_s = perturbed_chart(geom.chart, field_fn, s, field_d1=field_d1)
        geom_s = compute_geometry(chart_s, geom.grid)
    return evaluate_F(geom_s, x=xs, t=ts, estimate_order=False).value


def fd_variation(geom: GridGeometry, field_fn, field_d1, var: VariationData,
                 order: int, x0=None, t0: float = 1.0, h: float = 5e-3,
                 richardson: bool = True):
    """Central finite-difference d^k F / ds^k along a straight-line family.

    Returns (value, mismatch_estimate); the mismatch is the Richardson
    difference between steps h and h/2.
    """
    def stencil(hh: float) -> float:
        fp = f_along_family(geom, field_fn, field_d1, var, +hh, x0, t0)
        fm = f_along_family(geom, field_fn, field_d1, var, -hh, x0, t0)
        if order == 1:
            return (fp - fm) / (2.0 * hh)
        f0 = f_along_family(geom, field_fn, field_d1, var, 0.0, x0, t0)
        return (fp - 2.0 * f0 + fm) / hh ** 2

    coarse = stencil(h)
    if not richardson:
        return coarse, float("nan")
    fine = stencil(h / 2.0)
    value = (4.0 * fine - coarse) / 3.0
    return value, abs(fine - coarse)
