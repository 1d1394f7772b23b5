"""Uniform 1-D grids, node-sampled fields, bump kernels and mollifiers.

Everything downstream (fluxes, flows, the solver, the diagnostics) lives on
the single uniform grid defined here.  The model is deliberately simple:

* fields are sampled at the ``n_cells + 1`` grid nodes and interpreted as
  piecewise-linear between them,
* all quadrature is composite trapezoid,
* the real line is truncated to a grid wide enough that compactly supported
  data never reaches the boundary; out-of-grid evaluations return zero and
  are counted rather than silently absorbed.

Kernels and mollifiers use the standard compactly supported bump profile
``exp(-1/(1-s^2))`` on ``|s| < 1``, which is smooth, nonnegative and exactly
zero outside its support.  Discrete convolution weights are renormalized to
unit mass so that convolving a constant with a normalized kernel reproduces
the constant exactly (and mass is preserved exactly for interior data).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np
from scipy import signal

from .errors import GridCompatibilityError, ResolutionError

# Mass of the unnormalized profile exp(-1/(1-s^2)) over [-1, 1]; verified
# against adaptive quadrature in the test suite.
BUMP_PROFILE_MASS = 0.44399381616807865


def bump_profile(s: np.ndarray | float) -> np.ndarray:
    """Unnormalized bump ``exp(-1/(1-s^2))`` on ``|s| < 1``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def bump_profile_d1(s: np.ndarray | float) -> np.ndarray:
    """First derivative of :func:`bump_profile`."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    q = 1.0 - si * si
    out[inside] = np.exp(-1.0 / q) * (-2.0 * si / q**2)
    return out


def bump_profile_d2(s: np.ndarray | float) -> np.ndarray:
    """Second derivative of :func:`bump_profile`."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    q = 1.0 - si * si
    s2 = si * si
    out[inside] = np.exp(-1.0 / q) * (4.0 * s2 / q**4 - 2.0 / q**2 - 8.0 * s2 / q**3)
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n_cells`` cells on ``[x_min, x_max]``.

    Nodes are ``x_i = x_min + i * dx`` for ``i = 0..n_cells``.
    """

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n_cells < 2:
            raise ValueError(f"grid needs n_cells >= 2, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_nodes)
        x.flags.writeable = False
        return x

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Composite trapezoid weights: ``dx`` in the interior, ``dx/2`` at ends."""
        w = np.full(self.n_nodes, self.dx)
        w[0] *= 0.5
        w[-1] *= 0.5
        w.flags.writeable = False
        return w


@dataclass(frozen=True, eq=False)
class Field:
    """Node-sampled function of space at a fixed simulation time."""

    grid: Grid
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field needs {self.grid.n_nodes} node values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, fn, time_tag: float = 0.0) -> "Field":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float), time_tag)

    @classmethod
    def zeros(cls, grid: Grid, time_tag: float = 0.0) -> "Field":
        return cls(grid, np.zeros(grid.n_nodes), time_tag)

    def with_values(self, values: np.ndarray, time_tag: float | None = None) -> "Field":
        return Field(self.grid, values, self.time_tag if time_tag is None else time_tag)


@dataclass(frozen=True)
class BumpKernel:
    """Smooth, compactly supported, nonnegative kernel with unit mass.

    ``K(x) = bump((x - center)/radius) / (radius * BUMP_PROFILE_MASS)`` so that
    the continuum integral of ``K`` is one.
    """

    center: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"kernel radius must be positive, got {self.radius}")

    @property
    def normalization(self) -> float:
        return 1.0 / (self.radius * BUMP_PROFILE_MASS)

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        return bump_profile(s) * self.normalization

    def derivative(self, x: np.ndarray | float) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        return bump_profile_d1(s) * self.normalization / self.radius

    def second_derivative(self, x: np.ndarray | float) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        return bump_profile_d2(s) * self.normalization / self.radius**2

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)

    def grid_taps(self, dx: float) -> tuple[int, np.ndarray]:
        """Discrete convolution weights on the lattice ``{q * dx}``.

        Returns ``(q_min, w)`` where ``w[j]`` is the weight attached to the
        lattice offset ``(q_min + j) * dx``.  The weights are trapezoid
        samples ``K(q*dx) * dx`` renormalized to exact unit sum, so discrete
        convolution preserves constants and total mass exactly.
        """
        if self.radius < dx:
            raise ResolutionError(
                f"kernel radius {self.radius:g} is below the grid spacing {dx:g}"
            )
        lo, hi = self.support
        q_min = math.floor(lo / dx) + 1
        q_max = math.ceil(hi / dx) - 1
        if q_max < q_min:  # support narrower than one cell around the lattice
            raise ResolutionError(
                f"kernel support ({lo:g}, {hi:g}) contains no lattice point at dx={dx:g}"
            )
        offsets = dx * np.arange(q_min, q_max + 1)
        w = self(offsets) * dx
        total = w.sum()
        if total <= 0:
            raise ResolutionError("kernel sampled to zero mass; refine the grid")
        return q_min, w / total


@dataclass(frozen=True)
class Mollifier:
    """Symmetric approximate identity ``rho_eps(x) = rho(x/eps)/eps``.

    The fixed profile ``rho`` is the normalized bump of radius one, so the
    support is ``[-eps, eps]`` and the continuum mass is one.
    """

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"mollifier width must be positive, got {self.epsilon}")

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        s = np.asarray(x, dtype=float) / self.epsilon
        return bump_profile(s) / (self.epsilon * BUMP_PROFILE_MASS)

    @property
    def support(self) -> tuple[float, float]:
        return (-self.epsilon, self.epsilon)

    def min_spacing_ok(self, dx: float) -> bool:
        """Resolution rule used throughout: ``eps >= 4 dx``."""
        return self.epsilon >= 4.0 * dx - 1e-12 * dx

    def grid_taps(self, dx: float) -> tuple[int, np.ndarray]:
        if not self.min_spacing_ok(dx):
            raise ResolutionError(
                f"mollifier width {self.epsilon:g} is under-resolved; need >= 4*dx = {4*dx:g}"
            )
        return BumpKernel(0.0, self.radius_as_kernel).grid_taps(dx)

    @property
    def radius_as_kernel(self) -> float:
        return self.epsilon


KernelLike = Union[BumpKernel, Mollifier]


class BoundaryCounter:
    """Mutable counter of out-of-grid evaluations (compact-support violations)."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def __repr__(self):  # pragma: no cover - debug helper
        return f"BoundaryCounter(count={self.count})"


def _checked_taps(kernel: KernelLike, grid: Grid) -> tuple[int, np.ndarray]:
    q_min, w = kernel.grid_taps(grid.dx)
    if w.size > grid.n_nodes:
        raise ResolutionError(
            f"kernel needs {w.size} lattice points but the grid only has {grid.n_nodes}"
        )
    return q_min, w


def _aligned(full: np.ndarray, q_min: int, n_nodes: int) -> np.ndarray:
    # out[i] = full[i - q_min] where defined; zero where the supports miss.
    out = np.zeros(full.shape[:-1] + (n_nodes,))
    lo = max(0, q_min)
    hi = min(n_nodes, q_min + full.shape[-1])
    if hi > lo:
        out[..., lo:hi] = full[..., lo - q_min : hi - q_min]
    return out


def convolve(f: Field, kernel: KernelLike) -> Field:
    """Trapezoid-quadrature convolution ``(K * f)(x_i)`` on the grid of ``f``.

    ``f`` is treated as zero outside the grid.  The kernel must be resolved
    by the grid spacing and must not be wider than the grid itself.
    """
    grid = f.grid
    q_min, w = _checked_taps(kernel, grid)
    g = f.values * grid.trapezoid_weights / grid.dx  # end-halved samples
    full = signal.convolve(g, w, mode="full", method="auto")
    return Field(grid, _aligned(full, q_min, grid.n_nodes), f.time_tag)


def convolve_many(values: np.ndarray, grid: Grid, kernel: KernelLike) -> np.ndarray:
    """Row-wise :func:`convolve` for a stack of snapshots ``(n_rows, n_nodes)``."""
    q_min, w = _checked_taps(kernel, grid)
    g = values * (grid.trapezoid_weights / grid.dx)[None, :]
    full = signal.fftconvolve(g, w[None, :], mode="full", axes=1)
    return _aligned(full, q_min, grid.n_nodes)


def primitive(f: Field) -> Field:
    """Cumulative trapezoid primitive with ``V(x_min) = 0``.

    The left grid edge stands in for minus infinity, so ``V(x_max)`` equals
    the total integral of ``f``; meaningful only for data supported inside
    the grid.
    """
    v = f.values
    inc = 0.5 * f.grid.dx * (v[1:] + v[:-1])
    out = np.concatenate(([0.0], np.cumsum(inc)))
    return Field(f.grid, out, f.time_tag)


def interpolate(
    f: Field,
    x: np.ndarray | float,
    counter: BoundaryCounter | None = None,
) -> np.ndarray | float:
    """Piecewise-linear interpolation of ``f``; zero outside the grid.

    Out-of-grid queries are counted on ``counter`` when one is supplied:
    they signal that the compact-support assumption broke down.
    """
    xs = np.asarray(x, dtype=float)
    if counter is not None:
        outside = int(np.sum((xs < f.grid.x_min) | (xs > f.grid.x_max)))
        if outside:
            counter.add(outside)
    out = np.interp(xs, f.grid.nodes, f.values, left=0.0, right=0.0)
    if np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0):
        return float(out)
    return out


class FieldNorms(NamedTuple):
    l1: float
    l2: float
    linf: float


def norms(f: Field) -> FieldNorms:
    """Trapezoid L1, L2 and sup norms of a field."""
    w = f.grid.trapezoid_weights
    v = f.values
    l1 = float(np.dot(w, np.abs(v)))
    l2 = float(math.sqrt(np.dot(w, v * v)))
    linf = float(np.max(np.abs(v))) if v.size else 0.0
    return FieldNorms(l1=l1, l2=l2, linf=linf)


def l1_distance(a: Field, b: Field) -> float:
    """Trapezoid L1 distance; fields on nested grids are compared on the coarser one."""
    if a.grid == b.grid:
        w = a.grid.trapezoid_weights
        return float(np.dot(w, np.abs(a.values - b.values)))
    coarse, fine = (a, b) if a.grid.n_cells <= b.grid.n_cells else (b, a)
    ratio = fine.grid.n_cells / coarse.grid.n_cells
    nested = (
        coarse.grid.x_min == fine.grid.x_min
        and coarse.grid.x_max == fine.grid.x_max
        and ratio == int(ratio)
    )
    if not nested:
        raise GridCompatibilityError("fields live on non-nested grids")
    step = int(ratio)
    w = coarse.grid.trapezoid_weights
    return float(np.dot(w, np.abs(coarse.values - fine.values[::step])))
