"""Constructors for canonical self-shrinkers.

Each builder returns a Shrinker: chart(s) plus a quadrature grid with cached
geometry, verified against the self-shrinker equation at every node.
Noncompact factors are truncated at a radius whose Gaussian tail is reported
(default 12: exp(-144/4) is far below double precision).

Sphere charts use hyperspherical angles with poles excluded (no node sits on
a coordinate degeneracy).  The polar quadrature rule is selectable:
Gauss-Legendre (default; the weighted integrals then converge to machine
precision) or uniform midpoint with pole-reflection ghosting (preferred for
finite-difference stencil studies).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .charts import AffineChart, AxisSpec, Chart, ProductChart, TrigChart
from .errors import InvalidDimension, InvalidSpec, UnknownName, VerificationError
from .geometry import GridGeometry, compute_geometry, shrinker_residual
from .quadrature import QuadratureGrid, build_grid, gaussian_box_tail

DEFAULT_TRUNCATION = 12.0


@dataclass
class Shrinker:
    """A built shrinker: chart, grid, cached geometry, and verification data."""

    spec: dict
    chart: Chart
    grid: QuadratureGrid
    geom: GridGeometry
    n: int
    m: int
    closed: bool
    name: str
    meta: dict = field(default_factory=dict)

    @property
    def weighted_area(self) -> float:
        return self.geom.weighted_area

    def describe(self) -> dict:
        return {
            "name": self.name,
            "spec": self.spec,
            "dim": self.n,
            "ambient_dim": self.m,
            "closed": self.closed,
            "grid": self.grid.meta(),
            "meta": {k: v for k, v in self.meta.items()
                     if isinstance(v, (int, float, str, bool, dict, list))},
        }


# ----------------------------------------------------------------------
# Charts
# ----------------------------------------------------------------------

def circle_chart(radius: float, spectral: bool = False) -> TrigChart:
    return TrigChart(
        coords=[(radius, [([1.0], 0.0)]),
                (radius, [([1.0], -math.pi / 2.0)])],
        axes=[AxisSpec(0.0, 2.0 * math.pi, periodic=True, spectral=spectral)],
        name=f"circle_r{radius:g}")


def sphere_chart(n: int, radius: float | None = None, polar_rule="legendre",
                 ambient_pad: int = 0) -> TrigChart:
    """Round sphere S^n(radius) in hyperspherical angles.

    Coordinates x_0 = R cos(t_1), x_k = R sin(t_1)..sin(t_k) cos(t_{k+1}),
    x_n = R sin(t_1)..sin(t_{n-1}) sin(phi); the default radius sqrt(2n)
    makes it a self-shrinker.  ``ambient_pad`` appends zero coordinates.
    """
    if n < 1:
        raise InvalidDimension(f"sphere dimension must be >= 1, got {n}")
    R = math.sqrt(2.0 * n) if radius is None else float(radius)
    if n == 1:
        chart = circle_chart(R)
        chart.name = f"sphere1_R{R:g}"
    else:
        half = -math.pi / 2.0
        coords = []
        for k in range(n + 1):
            factors = []
            for i in range(min(k, n - 1)):
                factors.append((np.eye(n)[i], half))   # sin(t_{i+1})
            if k < n:
                factors.append((np.eye(n)[k], 0.0))    # cos(t_{k+1} or phi)
            else:
                factors.append((np.eye(n)[n - 1], half))  # sin(phi)
            coords.append((R, factors))
        axes = [AxisSpec(0.0, math.pi, periodic=False, rule=polar_rule)
                for _ in range(n - 1)]
        axes.append(AxisSpec(0.0, 2.0 * math.pi, periodic=True, spectral=True))
        reflections = {n - 2: n - 1} if polar_rule == "midpoint" else {}
        chart = TrigChart(coords, axes, pole_reflections=reflections,
                          name=f"sphere{n}_R{R:g}")
    if ambient_pad:
        chart = _pad_ambient(chart, ambient_pad)
    return chart


def _pad_ambient(chart: TrigChart, pad: int) -> TrigChart:
    coords = list(chart._coords) + [(0.0, []) for _ in range(pad)]
    return TrigChart(coords, chart.axes,
                     pole_reflections=chart.pole_reflections,
                     name=chart.name + f"_pad{pad}")


def plane_chart(n: int, truncation: float, codim: int = 1) -> AffineChart:
    basis = np.zeros((n, n + codim))
    basis[:, :n] = np.eye(n)
    axes = [AxisSpec(-truncation, truncation) for _ in range(n)]
    return AffineChart(basis, np.zeros(n + codim), axes, name=f"plane{n}")


def sphere_surface_area(n: int, R: float) -> float:
    return float(2.0 * math.pi ** ((n + 1) / 2.0)
                 / gamma_fn((n + 1) / 2.0) * R ** n)


def minimal_legendrian(n: int) -> Chart:
    """Minimal Legendrian (n-1)-manifold in S^(2n-1), block-real layout.

    n = 2: the great circle sigma -> (e^{i sigma}, e^{-i sigma})/sqrt(2);
    n >= 3: the flat torus
        (s_1..s_{n-1}) -> (e^{i s_1},.., e^{i s_{n-1}}, e^{-i(s_1+..)})/sqrt(n).
    Verified numerically by profile_curves.verify_legendrian at build time.
    """
    if n < 2:
        raise InvalidDimension(f"Legendrian factor needs n >= 2, got {n}")
    half = -math.pi / 2.0
    scale = 1.0 / math.sqrt(n)
    if n == 2:
        coords = [(scale, [([1.0], 0.0)]),       # Re z1 = cos
                  (scale, [([1.0], 0.0)]),       # Re z2 = cos(-s) = cos
                  (scale, [([1.0], half)]),      # Im z1 = sin
                  (-scale, [([1.0], half)])]     # Im z2 = -sin
        axes = [AxisSpec(0.0, 2.0 * math.pi, periodic=True)]
        return TrigChart(coords, axes, name="great_circle")
    k = n - 1
    ones = np.ones(k)
    coords = []
    for j in range(k):                           # Re z_j = cos(s_j)
        coords.append((scale, [(np.eye(k)[j], 0.0)]))
    coords.append((scale, [(ones, 0.0)]))        # Re z_n = cos(sum)
    for j in range(k):                           # Im z_j = sin(s_j)
        coords.append((scale, [(np.eye(k)[j], half)]))
    coords.append((scale, [(ones, math.pi / 2.0)]))  # Im z_n = -sin(sum)
    axes = [AxisSpec(0.0, 2.0 * math.pi, periodic=True) for _ in range(k)]
    return TrigChart(coords, axes, name=f"flat_legendrian_torus_n{n}")


# ----------------------------------------------------------------------
# Building and verification
# ----------------------------------------------------------------------

def _verify_residual(geom: GridGeometry, tol: float, what: str) -> float:
    res = float(np.linalg.norm(shrinker_residual(geom), axis=1).max())
    if res > tol:
        raise VerificationError(
            f"{what}: self-shrinker residual {res:.3e} exceeds {tol:.1e}")
    return res


def _finish(spec, chart, grid, n, closed, name, residual_tol, expect_shrinker,
            extra_meta=None) -> Shrinker:
    geom = compute_geometry(chart, grid)
    res = float(np.linalg.norm(shrinker_residual(geom), axis=1).max())
    if expect_shrinker and res > residual_tol:
        raise VerificationError(
            f"{name}: self-shrinker residual {res:.3e} exceeds {residual_tol:.1e}")
    meta = {"max_residual": res, "is_shrinker": res <= 1e-8}
    meta.update(extra_meta or {})
    return Shrinker(spec=spec, chart=chart, grid=grid, geom=geom, n=n,
                    m=chart.dim_ambient, closed=closed, name=name, meta=meta)


def _build_sphere(spec, resolution, residual_tol):
    if "n" not in spec:
        raise InvalidSpec("sphere spec needs the dimension n")
    n = int(spec["n"])
    radius = spec.get("radius")
    rule = spec.get("polar_rule", "legendre")
    pad = int(spec.get("ambient_pad", 0))
    chart = sphere_chart(n, radius=radius, polar_rule=rule, ambient_pad=pad)
    if resolution is None:
        resolution = (64,) if n == 1 else (48,) * (n - 1) + (96,)
    grid = build_grid(chart, resolution)
    R = math.sqrt(2.0 * n) if radius is None else float(radius)
    expect = radius is None or abs(R - math.sqrt(2.0 * n)) < 1e-12
    shr = _finish(spec, chart, grid, n, True, f"sphere{n}", residual_tol,
                  expect)
    area = float(shr.geom.integrate(np.ones(grid.node_count)))
    closed_form = sphere_surface_area(n, R)
    shr.meta["area_quadrature"] = area
    shr.meta["area_closed_form"] = closed_form
    shr.meta["pole_area_deficit"] = abs(closed_form - area)
    return shr


def _build_circle(spec, resolution, residual_tol):
    radius = float(spec.get("radius", math.sqrt(2.0)))
    chart = circle_chart(radius)
    grid = build_grid(chart, resolution or 64)
    expect = abs(radius - math.sqrt(2.0)) < 1e-12
    return _finish(spec, chart, grid, 1, True, f"circle_r{radius:g}",
                   residual_tol, expect)


def _build_plane(spec, resolution, residual_tol):
    if "n" not in spec:
        raise InvalidSpec("plane spec needs the dimension n")
    n = int(spec["n"])
    R = float(spec.get("truncation", DEFAULT_TRUNCATION))
    chart = plane_chart(n, R, codim=int(spec.get("codim", 1)))
    grid = build_grid(chart, resolution or 64, truncation_radius=R)
    grid.notes["flat_axes"] = n
    grid.notes["compact_f_mass"] = 1.0
    grid.tail_bound = gaussian_box_tail(n, R)
    return _finish(spec, chart, grid, n, False, f"plane{n}", residual_tol,
                   True, extra_meta={"tail_bound": grid.tail_bound})


def _build_cylinder(spec, resolution, residual_tol):
    if "k" not in spec:
        raise InvalidSpec("cylinder spec needs the sphere dimension k")
    k = int(spec["k"])
    flat = int(spec.get("flat", spec.get("n", k + 1) - k))
    if k < 1 or flat < 1:
        raise InvalidSpec(
            f"cylinder needs sphere dim k >= 1 and flat dim >= 1, "
            f"got k={k}, flat={flat}")
    R = float(spec.get("truncation", DEFAULT_TRUNCATION))
    sph = sphere_chart(k)
    line_basis = np.eye(flat)
    line = AffineChart(line_basis, np.zeros(flat),
                       [AxisSpec(-R, R) for _ in range(flat)],
                       name=f"axis{flat}")
    chart = ProductChart([sph, line], name=f"cylinder_{k}_{flat}")
    if resolution is None:
        sph_res = (64,) if k == 1 else (48,) * (k - 1) + (96,)
        resolution = sph_res + (48,) * flat
    grid = build_grid(chart, resolution, truncation_radius=R)
    grid.notes["flat_axes"] = flat
    n = k + flat
    shr = _finish(spec, chart, grid, n, False, f"cylinder{k}x{flat}",
                  residual_tol, True)
    sph_area = sphere_surface_area(k, math.sqrt(2.0 * k))
    weighted_sphere = sph_area * math.exp(-k / 2.0)
    grid.tail_bound = gaussian_box_tail(flat, R, compact_mass=weighted_sphere)
    grid.notes["compact_f_mass"] = (4.0 * math.pi) ** (-k / 2.0) * weighted_sphere
    shr.meta["tail_bound"] = grid.tail_bound
    return shr


def _build_product(spec, resolution, residual_tol):
    factors = [build(f, residual_tol=residual_tol) for f in spec["factors"]]
    if resolution is not None:
        resolution = tuple(resolution)
        built = []
        i = 0
        for f in spec["factors"]:
            d = len(build(f).grid.resolution)
            built.append(build(f, resolution=resolution[i:i + d],
                               residual_tol=residual_tol))
            i += d
        factors = built
    out = factors[0]
    for nxt in factors[1:]:
        out = product_shrinker(out, nxt, residual_tol=residual_tol)
    out.spec = spec
    return out


def product_shrinker(s1: Shrinker, s2: Shrinker, residual_tol=1e-10) -> Shrinker:
    """Cartesian product of two built shrinkers; the mean curvature splits
    as (H_1, H_2) and the product grid is the tensor grid."""
    chart = ProductChart([s1.chart, s2.chart],
                         name=f"{s1.name}*{s2.name}")
    resolution = s1.grid.resolution + s2.grid.resolution
    trunc = [g.truncation_radius for g in (s1.grid, s2.grid)
             if g.truncation_radius is not None]
    grid = build_grid(chart, resolution,
                      truncation_radius=min(trunc) if trunc else None)
    flat = int(s1.grid.notes.get("flat_axes", 0)
               + s2.grid.notes.get("flat_axes", 0))
    if flat:
        grid.notes["flat_axes"] = flat
    spec = {"kind": "product", "factors": [s1.spec, s2.spec]}
    expect = s1.meta.get("is_shrinker", True) and s2.meta.get("is_shrinker", True)
    tol = max(residual_tol, s1.meta.get("max_residual", 0.0) * 2 + 1e-12,
              s2.meta.get("max_residual", 0.0) * 2 + 1e-12)
    shr = _finish(spec, chart, grid, s1.n + s2.n, s1.closed and s2.closed,
                  f"{s1.name}*{s2.name}", tol, expect)
    if flat:
        compact_w = shr.geom.weighted_area  # finite thanks to truncation
        grid.tail_bound = gaussian_box_tail(
            flat, grid.truncation_radius or DEFAULT_TRUNCATION,
            compact_mass=compact_w)
        shr.meta["tail_bound"] = grid.tail_bound
    shr.factors = (s1, s2)
    return shr


def _build_anciaux(spec, resolution, residual_tol):
    from . import profile_curves as pc

    if "n" not in spec:
        raise InvalidSpec("anciaux spec needs the dimension n")
    n = int(spec["n"])
    profile = spec.get("profile", "circle" if "pieces" not in spec else "shoot")
    if profile == "circle":
        curve = pc.circle_profile(n, pieces=int(spec.get("pieces", 2)))
    else:
        bracket = spec.get("bracket")
        if bracket is None:
            bracket = (0.05 * pc.e_max(n), 0.999 * pc.e_max(n))
        curve = pc.shoot_closed(n, int(spec["index"]), int(spec["pieces"]),
                                bracket)
    psi = minimal_legendrian(n)
    if resolution is None:
        s_res = max(256, 48 * (curve.pieces or 2))
        resolution = (s_res,) + (48,) * (n - 1)
    tol = max(residual_tol, 1e-6)
    shr = pc.assemble(curve, psi, resolution=resolution, residual_tol=tol)
    shr.spec = dict(spec)
    return shr


_BUILDERS = {
    "sphere": _build_sphere,
    "circle": _build_circle,
    "plane": _build_plane,
    "cylinder": _build_cylinder,
    "product": _build_product,
    "anciaux": _build_anciaux,
}

NAMED_SPECS = {
    "sphere1": {"kind": "sphere", "n": 1},
    "sphere2": {"kind": "sphere", "n": 2},
    "plane2": {"kind": "plane", "n": 2},
    "cylinder": {"kind": "cylinder", "k": 1, "flat": 1},
    "torus": {"kind": "product",
              "factors": [{"kind": "sphere", "n": 1},
                          {"kind": "sphere", "n": 1}]},
    "unit-circle": {"kind": "circle", "radius": 1.0},
    "anciaux2": {"kind": "anciaux", "n": 2, "profile": "circle"},
    "anciaux2-l3m7": {"kind": "anciaux", "n": 2, "profile": "shoot",
                      "index": 3, "pieces": 7},
}


def resolve_spec(source) -> dict:
    """Accept a spec dict, a catalog name, a bare kind name, or a JSON file."""
    if isinstance(source, dict):
        return dict(source)
    if isinstance(source, str):
        if source in NAMED_SPECS:
            return dict(NAMED_SPECS[source])
        if source in _BUILDERS:
            return {"kind": source}
        try:
            with open(source) as fh:
                return json.load(fh)
        except FileNotFoundError:
            raise UnknownName(
                f"unknown catalog name or missing spec file: {source!r}")
    raise InvalidSpec(f"cannot interpret spec source {source!r}")


def build(spec, resolution=None, residual_tol: float = 1e-10) -> Shrinker:
    """Build a shrinker from a spec dict, catalog name, or spec file."""
    spec = resolve_spec(spec)
    kind = spec.get("kind")
    if kind not in _BUILDERS:
        raise InvalidSpec(f"unknown shrinker kind {kind!r}")
    if resolution is not None:
        if np.isscalar(resolution):
            resolution = int(resolution)
        if np.min(np.atleast_1d(resolution)) < 8:
            raise InvalidSpec("resolution must be at least 8 per axis")
    return _BUILDERS[kind](spec, resolution, residual_tol)
