"""Periodic grid on the circle [-pi, pi), scalar fields and pseudographs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def wrap_angle(x):
    """Wrap angles to [-pi, pi)."""
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


def periodic_distance(x: float, y: float) -> float:
    """Geodesic distance on the circle, in [0, pi]."""
    return float(np.abs(wrap_angle(np.asarray(x) - np.asarray(y))))


def periodic_difference(x, y):
    """Signed displacement x - y wrapped to [-pi, pi)."""
    return wrap_angle(np.asarray(x) - np.asarray(y))


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid x_i = -pi + i*dx with dx = 2*pi/n.  n must be even, >= 16."""

    n: int

    def __post_init__(self):
        if self.n < 16 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 16, got {self.n}")

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def nodes(self) -> np.ndarray:
        return -np.pi + self.dx * np.arange(self.n)

    def index_of(self, x: float) -> int:
        """Nearest node index (periodic)."""
        return int(np.round((wrap_angle(x) + np.pi) / self.dx)) % self.n


@dataclass(frozen=True)
class ScalarField:
    """Nodal values of a continuous function on the circle."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError("field length must equal grid size")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn) -> "ScalarField":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float) * np.ones(grid.n))

    @classmethod
    def constant(cls, grid: PeriodicGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n, float(value)))

    def __call__(self, x):
        return interpolate(self, x)

    def sup_distance(self, other: "ScalarField") -> float:
        return float(np.max(np.abs(self.values - other.values)))


def interpolate(fld: ScalarField, x):
    """Periodic piecewise-linear interpolation; exact at nodes."""
    t = (wrap_angle(x) + np.pi) / fld.grid.dx
    i0 = np.floor(t).astype(int) % fld.grid.n
    frac = t - np.floor(t)
    i1 = (i0 + 1) % fld.grid.n
    out = fld.values[i0] * (1.0 - frac) + fld.values[i1] * frac
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out)
    return out


def interpolate_gradient(fld: ScalarField, x):
    """Centered-difference nodal gradients, linearly interpolated."""
    g = nodal_gradients(fld)
    t = (wrap_angle(x) + np.pi) / fld.grid.dx
    i0 = np.floor(t).astype(int) % fld.grid.n
    frac = t - np.floor(t)
    i1 = (i0 + 1) % fld.grid.n
    out = g[i0] * (1.0 - frac) + g[i1] * frac
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out)
    return out


def nodal_gradients(fld: ScalarField) -> np.ndarray:
    v = fld.values
    return (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * fld.grid.dx)


def mollify(fld: ScalarField, width: float) -> ScalarField:
    """Circular convolution with a normalized truncated Gaussian of std `width`.

    Preserves constants exactly; output range stays within the input range.
    """
    dx = fld.grid.dx
    if width < dx:
        raise ValueError(f"mollifier width {width} below grid spacing {dx}")
    radius = min(int(np.ceil(4.0 * width / dx)), fld.grid.n // 2)
    offs = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offs * dx / width) ** 2)
    kernel /= kernel.sum()
    out = np.zeros(fld.grid.n)
    for k, wgt in zip(offs, kernel):
        out += wgt * np.roll(fld.values, -k)
    return ScalarField(fld.grid, out)


@dataclass(frozen=True)
class PseudographSample:
    """One-sided difference quotients of a field and the jets they span.

    At nodes where the backward and forward quotients agree within kink_tol
    the node is flagged differentiable and carries their mean as a single
    jet; elsewhere both one-sided jets are kept (reachable differentials of
    the piecewise-linear interpolant).
    """

    field: ScalarField
    backward: np.ndarray
    forward: np.ndarray
    differentiable: np.ndarray
    kink_tol: float

    @property
    def all_differentiable(self) -> bool:
        return bool(np.all(self.differentiable))

    def gradients(self) -> np.ndarray:
        """Mean one-sided quotient per node (the jet value where smooth)."""
        return 0.5 * (self.backward + self.forward)

    def jets(self) -> np.ndarray:
        """Array of (x, u, p) rows; kink nodes contribute two rows."""
        xs = self.field.grid.nodes
        us = self.field.values
        rows = []
        mean = self.gradients()
        for i in range(self.field.grid.n):
            if self.differentiable[i]:
                rows.append((xs[i], us[i], mean[i]))
            else:
                rows.append((xs[i], us[i], self.backward[i]))
                rows.append((xs[i], us[i], self.forward[i]))
        return np.asarray(rows)


def default_kink_tol(fld: ScalarField) -> float:
    """10*dx times a robust curvature scale of the field (at least 1)."""
    v = fld.values
    dx = fld.grid.dx
    curv = np.abs(np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / dx**2
    scale = max(1.0, float(np.median(curv)))
    return 10.0 * dx * scale


def pseudograph_sample(fld: ScalarField, kink_tol: float | None = None) -> PseudographSample:
    """One-sided difference quotients with a differentiability flag per node."""
    if kink_tol is None:
        kink_tol = default_kink_tol(fld)
    v = fld.values
    dx = fld.grid.dx
    fwd = (np.roll(v, -1) - v) / dx
    bwd = (v - np.roll(v, 1)) / dx
    diff = np.abs(fwd - bwd) < kink_tol
    return PseudographSample(fld, bwd, fwd, diff, float(kink_tol))


def total_variation(fld: ScalarField) -> float:
    v = fld.values
    return float(np.sum(np.abs(np.roll(v, -1) - v)))
