"""Structured quadrature grids on chart domains.

Periodic axes carry equispaced nodes with uniform weights (trapezoidal rule,
spectrally accurate for smooth periodic integrands).  Non-periodic axes use
Gauss-Legendre nodes, except axes flagged with a pole reflection, which use
the uniform midpoint rule so that sampled fields can be differentiated by
central differences straight through the coordinate degeneracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erfc

from .charts import Chart
from .errors import ResolutionTooLow


@dataclass
class QuadratureGrid:
    axis_nodes: tuple
    axis_weights: tuple
    rules: tuple
    periodic: tuple
    spacing: tuple          # uniform spacing per axis, None for Gauss nodes
    shape: tuple
    nodes: np.ndarray       # (N, n) tensor-product parameter points
    weights: np.ndarray     # (N,) parameter-volume weights
    resolution: tuple
    truncation_radius: float | None = None
    tail_bound: float = 0.0     # Gaussian-weighted area discarded beyond the grid
    notes: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def meta(self) -> dict:
        return {
            "resolution": list(self.resolution),
            "rules": list(self.rules),
            "node_count": int(self.node_count),
            "truncation_radius": self.truncation_radius,
            "tail_bound": float(self.tail_bound),
        }


def _axis_rule(ax, count, prefer_midpoint):
    if count < 4:
        raise ResolutionTooLow(f"need at least 4 nodes per axis, got {count}")
    if ax.periodic:
        h = ax.extent / count
        nodes = ax.lo + h * np.arange(count)
        return nodes, np.full(count, h), "uniform", h
    rule = ax.rule
    if rule == "auto":
        rule = "midpoint" if prefer_midpoint else "legendre"
    if rule == "midpoint":
        h = ax.extent / count
        nodes = ax.lo + h * (np.arange(count) + 0.5)
        return nodes, np.full(count, h), "midpoint", h
    if rule == "legendre":
        x, w = leggauss(count)
        half = 0.5 * ax.extent
        nodes = ax.lo + half * (x + 1.0)
        return nodes, w * half, "legendre", None
    raise ValueError(f"unknown quadrature rule {rule!r}")


def build_grid(chart: Chart, resolution, truncation_radius=None) -> QuadratureGrid:
    """Tensor-product grid over the chart domain."""
    n = chart.dim_domain
    if np.isscalar(resolution):
        resolution = (int(resolution),) * n
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != n:
        raise ResolutionTooLow(
            f"resolution has {len(resolution)} entries for {n} axes")

    axis_nodes, axis_weights, rules, spacing = [], [], [], []
    for k, ax in enumerate(chart.axes):
        prefer_mid = k in chart.pole_reflections
        nd, wt, rl, h = _axis_rule(ax, resolution[k], prefer_mid)
        axis_nodes.append(nd)
        axis_weights.append(wt)
        rules.append(rl)
        spacing.append(h)

    mesh = np.meshgrid(*axis_nodes, indexing="ij")
    nodes = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    wmesh = np.meshgrid(*axis_weights, indexing="ij")
    weights = np.ones(nodes.shape[0])
    for w in wmesh:
        weights = weights * w.reshape(-1)

    return QuadratureGrid(
        axis_nodes=tuple(axis_nodes), axis_weights=tuple(axis_weights),
        rules=tuple(rules), periodic=tuple(ax.periodic for ax in chart.axes),
        spacing=tuple(spacing), shape=tuple(resolution),
        nodes=nodes, weights=weights, resolution=resolution,
        truncation_radius=truncation_radius)


def gaussian_line_tail(radius: float) -> float:
    """Integral of exp(-u^2/4) over |u| > radius on the real line."""
    return float(2.0 * math.sqrt(math.pi) * erfc(radius / 2.0))


def gaussian_box_tail(n_flat: int, radius: float, compact_mass: float = 1.0) -> float:
    """Bound on the Gaussian-weighted area lost by truncating ``n_flat``
    orthogonal flat directions at +-radius; the compact factor contributes a
    bounded multiplier ``compact_mass`` (its own weighted area)."""
    if n_flat == 0:
        return 0.0
    full = 2.0 * math.sqrt(math.pi)
    per_axis = gaussian_line_tail(radius)
    return float(n_flat * per_axis * full ** (n_flat - 1) * compact_mass)
