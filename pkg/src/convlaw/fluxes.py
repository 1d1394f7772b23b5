"""Flux models ``F(t, x, z)``, their partial derivatives, and spatial mollification.

A :class:`FluxModel` bundles vectorized evaluators for ``F`` and its partials
``F_t = d/dt F``, ``F_z = d/dz F`` and ``F_zz = d^2/dz^2 F``.  The partials in
the third slot are supplied analytically: the flow diagnostics consume them
directly and finite differencing would inject noise into moment estimates.

:class:`RegularizedFlux` smooths a base model in ``x`` only,

    ``F_eps(t, x, z) = integral F(t, x - y, z) rho_eps(y) dy``,

by quadrature on the grid lattice with renormalized bump weights, so constants
mollify exactly and a symmetric step mollifies to its midpoint.  The spatial
derivative of the mollified flux is taken by central differences with step
``dx``; combined with the chain rule in the ``z`` slot this yields the total
spatial derivative of the composed drift ``x -> F_eps(t, x, (K*u)(x))`` that
drives the variational Jacobian of the characteristic flow.

For time-independent base models the mollified flux and its ``z`` derivative
can be pre-tabulated on an ``(x, z)`` lattice at construction; the per-step
drift assembly then reduces to table lookups.  The tabulated path interpolates
linearly in ``z`` (the table is built wide and dense enough that this sits far
below the scheme's discretization error) while :meth:`RegularizedFlux.evaluate`
always performs the exact quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ResolutionError
from .fields import BumpKernel, Field, Grid, Mollifier, interpolate

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _broadcast_zeros(t, x, z) -> np.ndarray:
    return np.zeros(np.broadcast(np.asarray(t), np.asarray(x), np.asarray(z)).shape)


@dataclass(frozen=True)
class FluxModel:
    """Evaluators for ``F(t, x, z)`` and its partials, plus model metadata."""

    name: str
    f: Evaluator
    f_dt: Evaluator
    f_dz: Evaluator
    f_dzz: Evaluator
    spatially_smooth: bool = True
    z_dependent: bool = True
    time_dependent: bool = False
    jump_locations: tuple[float, ...] = ()
    demo_only: bool = False

    def evaluate(self, t, x, z) -> np.ndarray:
        return np.asarray(self.f(np.asarray(t), np.asarray(x), np.asarray(z)), dtype=float)

    def evaluate_dt(self, t, x, z) -> np.ndarray:
        return np.asarray(self.f_dt(np.asarray(t), np.asarray(x), np.asarray(z)), dtype=float)

    def evaluate_dz(self, t, x, z) -> np.ndarray:
        return np.asarray(self.f_dz(np.asarray(t), np.asarray(x), np.asarray(z)), dtype=float)

    def evaluate_dzz(self, t, x, z) -> np.ndarray:
        return np.asarray(self.f_dzz(np.asarray(t), np.asarray(x), np.asarray(z)), dtype=float)

    def partials_consistency(self, t, x, z, h: float = 1e-4) -> tuple[float, float]:
        """Max abs gap between analytic and central-difference z-partials.

        Only meaningful at points where ``F`` is smooth in ``z``.
        """
        t, x, z = np.asarray(t), np.asarray(x), np.asarray(z)
        fd_z = (self.evaluate(t, x, z + h) - self.evaluate(t, x, z - h)) / (2 * h)
        fd_zz = (
            self.evaluate(t, x, z + h) - 2 * self.evaluate(t, x, z) + self.evaluate(t, x, z - h)
        ) / h**2
        return (
            float(np.max(np.abs(fd_z - self.evaluate_dz(t, x, z)))),
            float(np.max(np.abs(fd_zz - self.evaluate_dzz(t, x, z)))),
        )


@dataclass(frozen=True, eq=False)
class RegularizedFlux:
    """Base flux mollified in ``x`` with width ``epsilon`` on a reference grid."""

    base: FluxModel
    epsilon: float
    grid: Grid
    # populated in __post_init__ / table construction
    _q_min: int = field(init=False, repr=False, default=0)
    _taps: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        mol = Mollifier(self.epsilon)
        q_min, taps = mol.grid_taps(self.grid.dx)
        object.__setattr__(self, "_q_min", q_min)
        object.__setattr__(self, "_taps", taps)
        object.__setattr__(self, "_table", None)

    # -- exact quadrature -------------------------------------------------

    def _mollify(self, evaluator: Evaluator, t, x, z) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        dx = self.grid.dx
        out = None
        for j, w in enumerate(self._taps):
            shift = (self._q_min + j) * dx
            term = w * evaluator(t, x - shift, z)
            out = term if out is None else out + term
        return np.asarray(out, dtype=float)

    def evaluate(self, t, x, z) -> np.ndarray:
        """Quadrature evaluation of the x-mollified flux; t and z untouched."""
        return self._mollify(self.base.f, t, x, z)

    def evaluate_dz(self, t, x, z) -> np.ndarray:
        """Mollified z-partial (d/dz commutes with the x-convolution)."""
        return self._mollify(self.base.f_dz, t, x, z)

    # -- drift tabulation --------------------------------------------------

    def build_table(self, z_range: tuple[float, float], n_z: int = 513) -> None:
        """Pre-tabulate ``F_eps`` and its z-partial on an (x, z) lattice.

        Requires a time-independent base model.  The x lattice is the grid
        extended by one node on each side so central differences are available
        at the grid boundary.
        """
        if self.base.time_dependent:
            raise ValueError("cannot pre-tabulate a time-dependent flux")
        z_lo, z_hi = float(z_range[0]), float(z_range[1])
        if not z_lo < z_hi:
            raise ValueError("z_range must be an increasing pair")
        if not self.base.z_dependent:
            z_nodes = np.array([0.0])
        else:
            z_nodes = np.linspace(z_lo, z_hi, int(n_z))
        dx = self.grid.dx
        x_ext = np.concatenate(
            ([self.grid.x_min - dx], self.grid.nodes, [self.grid.x_max + dx])
        )
        tf = self.evaluate(0.0, x_ext[:, None], z_nodes[None, :])
        tfz = (
            self.evaluate_dz(0.0, x_ext[:, None], z_nodes[None, :])
            if self.base.z_dependent
            else np.zeros_like(tf)
        )
        object.__setattr__(
            self,
            "_table",
            {
                "z_lo": z_lo,
                "z_hi": z_hi,
                "z_nodes": z_nodes,
                "f": tf,
                "fz": tfz,
            },
        )

    @property
    def has_table(self) -> bool:
        return self._table is not None

    def _rows_at(self, table_values: np.ndarray, offset: int, z: np.ndarray) -> np.ndarray:
        tab = self._table
        n = self.grid.n_nodes
        rows = np.arange(n) + offset
        zn = tab["z_nodes"]
        if zn.size == 1:
            return table_values[rows, 0]
        dz = zn[1] - zn[0]
        pos = np.clip((z - zn[0]) / dz, 0.0, zn.size - 1.0)
        idx = np.minimum(pos.astype(np.intp), zn.size - 2)
        th = pos - idx
        return table_values[rows, idx] * (1.0 - th) + table_values[rows, idx + 1] * th

    def drift_profile(self, t: float, conv_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Composed drift and its total spatial derivative on the grid nodes.

        Given the frozen nonlocal field ``conv`` sampled at the nodes, returns
        ``G_i = F_eps(t, x_i, conv_i)`` and

            ``D_i = d/dx F_eps(t, x, z)|_{x_i, conv_i} + F_eps_z(t, x_i, conv_i) * conv'(x_i)``

        with the x-partial by central differences (step ``dx``, extending one
        node beyond each grid end) and ``conv'`` by central differences of the
        field (one-sided at the ends).
        """
        dx = self.grid.dx
        conv = np.asarray(conv_values, dtype=float)
        dconv = np.empty_like(conv)
        dconv[1:-1] = (conv[2:] - conv[:-2]) / (2 * dx)
        dconv[0] = (conv[1] - conv[0]) / dx
        dconv[-1] = (conv[-1] - conv[-2]) / dx
        if self._table is not None:
            tf, tfz = self._table["f"], self._table["fz"]
            g = self._rows_at(tf, 1, conv)
            f_plus = self._rows_at(tf, 2, conv)
            f_minus = self._rows_at(tf, 0, conv)
            fz = self._rows_at(tfz, 1, conv) if self.base.z_dependent else 0.0
        else:
            x = self.grid.nodes
            g = self.evaluate(t, x, conv)
            f_plus = self.evaluate(t, x + dx, conv)
            f_minus = self.evaluate(t, x - dx, conv)
            fz = self.evaluate_dz(t, x, conv) if self.base.z_dependent else 0.0
        d = (f_plus - f_minus) / (2 * dx) + fz * dconv
        return g, d


def regularize(
    flux: FluxModel,
    epsilon: float,
    grid: Grid,
    z_range: tuple[float, float] | None = None,
    n_z: int = 513,
) -> RegularizedFlux:
    """Mollify ``flux`` in ``x`` with width ``epsilon`` resolved on ``grid``.

    ``epsilon`` must be at least ``4 * dx``.  Passing ``z_range`` pre-tabulates
    the drift lookups for time-independent models.
    """
    if epsilon < 4.0 * grid.dx - 1e-12 * grid.dx:
        raise ResolutionError(
            f"mollification width {epsilon:g} under-resolved; need >= 4*dx = {4*grid.dx:g}"
        )
    reg = RegularizedFlux(flux, float(epsilon), grid)
    if z_range is not None and not flux.time_dependent:
        reg.build_table(z_range, n_z=n_z)
    return reg


def total_spatial_derivative(
    flux_eps: RegularizedFlux, t: float, x: float | np.ndarray, conv: Field
) -> float | np.ndarray:
    """Chain-rule spatial derivative of ``x -> F_eps(t, x, conv(x))``.

    The x-partial of the mollified flux is a central difference with step
    ``dx``; the derivative of the frozen nonlocal field is a central
    difference of the field.  Rejects evaluation at or beyond the grid
    boundary, where the central stencil leaves the grid.
    """
    grid = flux_eps.grid
    dx = grid.dx
    xs = np.asarray(x, dtype=float)
    if np.any(xs - dx < grid.x_min) or np.any(xs + dx > grid.x_max):
        raise ValueError("total_spatial_derivative needs interior points (one cell margin)")
    z = interpolate(conv, xs)
    df_dx = (
        flux_eps.evaluate(t, xs + dx, z) - flux_eps.evaluate(t, xs - dx, z)
    ) / (2 * dx)
    dconv = (interpolate(conv, xs + dx) - interpolate(conv, xs - dx)) / (2 * dx)
    out = df_dx + flux_eps.evaluate_dz(t, xs, z) * dconv
    if np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0):
        return float(out)
    return out


@dataclass(frozen=True)
class HypothesisReport:
    """Sampled estimates of the five mixed norms the flux class must satisfy."""

    f_linf_t_l1_x: float
    f_linf: float
    f1_linf_t_l1_x: float
    f3_linf: float
    f33_l2_t_l1_x: float
    resolution: tuple[int, int, int]
    finite: bool = True
    nonfinite_location: tuple[float, float, float] | None = None

    def as_dict(self) -> dict:
        return {
            "f_linf_t_l1_x": self.f_linf_t_l1_x,
            "f_linf": self.f_linf,
            "f1_linf_t_l1_x": self.f1_linf_t_l1_x,
            "f3_linf": self.f3_linf,
            "f33_l2_t_l1_x": self.f33_l2_t_l1_x,
            "resolution": list(self.resolution),
            "finite": self.finite,
        }


def verify_hypothesis(
    flux: FluxModel,
    box: Sequence[tuple[float, float]],
    resolution: tuple[int, int, int] = (17, 257, 33),
) -> HypothesisReport:
    """Estimate the admissibility norms of ``flux`` on a bounded (t, x, z) box.

    Mixed norms are evaluated by nested sampling: suprema over lattice
    samples, L1/L2 by trapezoid.  The box should cover the dynamically
    relevant range of a planned run.
    """
    (t0, t1), (x0, x1), (z0, z1) = box
    nt, nx, nz = resolution
    t = np.linspace(t0, t1, nt)[:, None, None]
    x = np.linspace(x0, x1, nx)[None, :, None]
    z = np.linspace(z0, z1, nz)[None, None, :]
    x_line = x[0, :, 0]

    samples = {
        "f": flux.evaluate(t, x, z),
        "f1": flux.evaluate_dt(t, x, z),
        "f3": flux.evaluate_dz(t, x, z),
        "f33": flux.evaluate_dzz(t, x, z),
    }
    for name, arr in samples.items():
        bad = ~np.isfinite(arr)
        if np.any(bad):
            it, ix, iz = np.argwhere(bad)[0]
            loc = (float(t[it, 0, 0]), float(x_line[ix]), float(z[0, 0, iz]))
            return HypothesisReport(
                np.nan, np.nan, np.nan, np.nan, np.nan,
                resolution=tuple(resolution), finite=False, nonfinite_location=loc,
            )

    def sup_t_l1_x(arr):
        sup_z = np.max(np.abs(arr), axis=2)
        return float(np.max(np.trapezoid(sup_z, x_line, axis=1)))

    f33_l1x = np.trapezoid(np.max(np.abs(samples["f33"]), axis=2), x_line, axis=1)
    f33_l2t = float(np.sqrt(np.trapezoid(f33_l1x**2, np.linspace(t0, t1, nt))))

    return HypothesisReport(
        f_linf_t_l1_x=sup_t_l1_x(samples["f"]),
        f_linf=float(np.max(np.abs(samples["f"]))),
        f1_linf_t_l1_x=sup_t_l1_x(samples["f1"]),
        f3_linf=float(np.max(np.abs(samples["f3"]))),
        f33_l2_t_l1_x=f33_l2t,
        resolution=tuple(resolution),
    )


# -- built-in catalog -------------------------------------------------------


def _lorentz(z):
    return 1.0 / (1.0 + z * z)


def _lorentz_d1(z):
    return -2.0 * z / (1.0 + z * z) ** 2


def _lorentz_d2(z):
    return (6.0 * z * z - 2.0) / (1.0 + z * z) ** 3


def zero_flux() -> FluxModel:
    return FluxModel(
        name="zero_flux",
        f=_broadcast_zeros,
        f_dt=_broadcast_zeros,
        f_dz=_broadcast_zeros,
        f_dzz=_broadcast_zeros,
        z_dependent=False,
    )


def constant_drift(speed: float = 1.0) -> FluxModel:
    c = float(speed)
    return FluxModel(
        name="constant_drift",
        f=lambda t, x, z: np.full(np.broadcast(t, x, z).shape, c),
        f_dt=_broadcast_zeros,
        f_dz=_broadcast_zeros,
        f_dzz=_broadcast_zeros,
        z_dependent=False,
    )


def smooth_nonlocal(amplitude: float = 1.0, radius: float = 1.0) -> FluxModel:
    """Separable model ``amp * b(x) / (1 + z^2)`` with a unit-mass bump ``b``."""
    bump = BumpKernel(0.0, float(radius))
    amp = float(amplitude)
    return FluxModel(
        name="smooth_nonlocal",
        f=lambda t, x, z: amp * bump(x) * _lorentz(z) + 0.0 * np.asarray(t),
        f_dt=_broadcast_zeros,
        f_dz=lambda t, x, z: amp * bump(x) * _lorentz_d1(z) + 0.0 * np.asarray(t),
        f_dzz=lambda t, x, z: amp * bump(x) * _lorentz_d2(z) + 0.0 * np.asarray(t),
        spatially_smooth=True,
    )


def linear_irregular(
    amplitude: float = 1.0,
    step_location: float = 0.0,
    edge_width: float = 0.05,
    window_half_width: float = 3.0,
    shoulder: float = 0.5,
) -> FluxModel:
    """Purely spatial drift ``b(x)``: a steep smoothed step times a localizing window.

    ``b`` is bounded and integrable but varies on the scale ``edge_width``,
    far below the mollification widths in play; it is the workhorse for the
    irregular-drift uniqueness studies.
    """
    amp = float(amplitude)
    x0, w = float(step_location), float(edge_width)
    a, b_edge, tau = -float(window_half_width), float(window_half_width), float(shoulder)

    def profile(x):
        x = np.asarray(x, dtype=float)
        step = 0.5 * (1.0 + np.tanh((x - x0) / w))
        window = 0.25 * (1.0 + np.tanh((x - a) / tau)) * (1.0 + np.tanh((b_edge - x) / tau))
        return amp * step * window

    return FluxModel(
        name="linear_irregular",
        f=lambda t, x, z: profile(x) + 0.0 * np.asarray(t) + 0.0 * np.asarray(z),
        f_dt=_broadcast_zeros,
        f_dz=_broadcast_zeros,
        f_dzz=_broadcast_zeros,
        spatially_smooth=False,
        z_dependent=False,
    )


def indicator_nonlocal(
    x_lo: float = -1.0, x_hi: float = 1.0, amplitude: float = 1.0
) -> FluxModel:
    """Genuinely discontinuous model ``amp * 1_(x_lo, x_hi)(x) / (1 + z^2)``.

    Only meaningful through :func:`regularize`; the jump locations are carried
    as metadata so grids can be laid out with nodes off the jumps.
    """
    lo, hi, amp = float(x_lo), float(x_hi), float(amplitude)

    def box(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > lo) & (x < hi), 1.0, 0.0)

    return FluxModel(
        name="indicator_nonlocal",
        f=lambda t, x, z: amp * box(x) * _lorentz(z) + 0.0 * np.asarray(t),
        f_dt=_broadcast_zeros,
        f_dz=lambda t, x, z: amp * box(x) * _lorentz_d1(z) + 0.0 * np.asarray(t),
        f_dzz=lambda t, x, z: amp * box(x) * _lorentz_d2(z) + 0.0 * np.asarray(t),
        spatially_smooth=False,
        jump_locations=(lo, hi),
    )


def burgers_like(amplitude: float = 1.0) -> FluxModel:
    """Demo-only model ``F = amp * z``; with a narrow kernel the drift is
    approximately the solution itself, so gradients steepen like an inviscid
    quadratic flux.  Deliberately outside the integrable-in-x class."""
    amp = float(amplitude)
    return FluxModel(
        name="burgers_like",
        f=lambda t, x, z: amp * np.asarray(z, dtype=float) + 0.0 * np.asarray(t) + 0.0 * np.asarray(x),
        f_dt=_broadcast_zeros,
        f_dz=lambda t, x, z: np.full(np.broadcast(t, x, z).shape, amp),
        f_dzz=_broadcast_zeros,
        spatially_smooth=True,
        demo_only=True,
    )


BUILTIN_FACTORIES: dict[str, Callable[..., FluxModel]] = {
    "zero_flux": zero_flux,
    "constant_drift": constant_drift,
    "smooth_nonlocal": smooth_nonlocal,
    "linear_irregular": linear_irregular,
    "indicator_nonlocal": indicator_nonlocal,
    "burgers_like": burgers_like,
}


def builtin_models() -> dict[str, Callable[..., FluxModel]]:
    """Catalog of named flux factories selectable from experiment configs."""
    return dict(BUILTIN_FACTORIES)


def make_flux(name: str, **params) -> FluxModel:
    try:
        factory = BUILTIN_FACTORIES[name]
    except KeyError:
        raise KeyError(
            f"unknown flux model {name!r}; available: {sorted(BUILTIN_FACTORIES)}"
        ) from None
    return factory(**params)
