"""Deterministically seeded Brownian paths on explicit time grids.

Paths are realized with the counter-based Philox generator: the stream for a
path is keyed by ``(master_seed, path_index)`` and the k-th increment is the
k-th draw of that stream, so ensembles are reproducible bit-for-bit and can
be generated independently per path in any order.

The stored representation is the path values ``B(t_k)`` (with ``B(0) = 0``);
increments are derived views.  Coarsening therefore preserves the values at
shared times exactly, and dyadic refinement inserts midpoints by Brownian
bridge using an auxiliary stream keyed by the refinement level, leaving the
original values untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

_REFINE_STREAM_TAG = 0x5EED_B41D


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """One realization of B on a time grid, reproducible from its seeds."""

    times: np.ndarray
    values: np.ndarray
    master_seed: int
    path_index: int
    refinement_level: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a path needs at least two time points")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("time grid must increase strictly from 0")
        if values.shape != times.shape:
            raise ValueError("values and times must align")
        if values[0] != 0.0:
            raise ValueError("paths start at B(0) = 0")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @cached_property
    def increments(self) -> np.ndarray:
        return _frozen(np.diff(self.values))

    def index_of(self, t: float) -> int:
        """Index of ``t`` on the time grid; rejects off-grid times."""
        k = int(np.searchsorted(self.times, t))
        if k >= self.times.size or self.times[k] != t:
            raise ValueError(f"time {t!r} is not on the path grid")
        return k


def sample_path(master_seed: int, path_index: int, time_grid) -> BrownianPath:
    """Draw one path; increment k is N(0, dt_k) from the (seed, index) stream."""
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or times.size < 2 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must increase strictly from 0")
    ss = np.random.SeedSequence([int(master_seed), int(path_index)])
    rng = np.random.Generator(np.random.Philox(ss))
    xi = rng.standard_normal(times.size - 1)
    increments = xi * np.sqrt(np.diff(times))
    values = np.concatenate(([0.0], np.cumsum(increments)))
    return BrownianPath(times, values, int(master_seed), int(path_index))


def sample_paths(master_seed: int, n_paths: int, time_grid) -> list[BrownianPath]:
    return [sample_path(master_seed, i, time_grid) for i in range(int(n_paths))]


def coarsen(path: BrownianPath, factor: int) -> BrownianPath:
    """Drop to every ``factor``-th time point; values at kept times are identical."""
    factor = int(factor)
    if factor < 1 or path.n_steps % factor != 0:
        raise ValueError(f"coarsening factor {factor} does not divide {path.n_steps} steps")
    return BrownianPath(
        path.times[::factor],
        path.values[::factor],
        path.master_seed,
        path.path_index,
        path.refinement_level,
    )


def refine(path: BrownianPath, factor: int = 2) -> BrownianPath:
    """Dyadic refinement by Brownian-bridge midpoint insertion.

    ``factor`` must be a power of two.  Existing values are preserved exactly;
    inserted midpoints use an auxiliary stream keyed by
    ``(master_seed, path_index, refinement_level)`` so refinement is itself
    reproducible.
    """
    factor = int(factor)
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"refinement factor must be a power of two, got {factor}")
    out = path
    while factor > 1:
        out = _refine_once(out)
        factor //= 2
    return out


def _refine_once(path: BrownianPath) -> BrownianPath:
    ss = np.random.SeedSequence(
        [path.master_seed, path.path_index, _REFINE_STREAM_TAG, path.refinement_level]
    )
    rng = np.random.Generator(np.random.Philox(ss))
    xi = rng.standard_normal(path.n_steps)
    t, v = path.times, path.values
    dt = np.diff(t)
    t_mid = 0.5 * (t[:-1] + t[1:])
    v_mid = 0.5 * (v[:-1] + v[1:]) + 0.5 * np.sqrt(dt) * xi
    times = np.empty(2 * path.n_steps + 1)
    values = np.empty_like(times)
    times[::2], times[1::2] = t, t_mid
    values[::2], values[1::2] = v, v_mid
    return BrownianPath(
        times, values, path.master_seed, path.path_index, path.refinement_level + 1
    )
