"""Structured space-time grids, fields, stencil operators and quadrature.

Everything downstream (functional evaluation, residuals, solvers) is built
from the operators in this module: second-order central differences with
one-sided closures at wall boundaries, trapezoid/rectangle quadrature, and
surface quadrature over wall faces. All operators are pure functions of
immutable inputs.

Field values are stored as float64 arrays of shape ``(*space_nodes,
time_nodes)``; the time axis is always last. A grid with ``time_nodes == 1``
encodes a steady problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

PERIODIC = "periodic"
WALL = "wall"


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid over a box domain and a time interval.

    Attributes:
        extents: physical box size per spatial axis.
        nodes: node count per spatial axis (>= 3 each).
        boundaries: "periodic" or "wall" per spatial axis. On a wall axis the
            nodes include both endpoints; on a periodic axis the right
            endpoint is excluded.
        time_nodes: number of time levels; 1 means a steady problem.
        dt: time step (ignored when time_nodes == 1).
    """

    extents: tuple[float, ...]
    nodes: tuple[int, ...]
    boundaries: tuple[str, ...]
    time_nodes: int = 1
    dt: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "boundaries", tuple(self.boundaries))
        if not (1 <= len(self.extents) <= 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {len(self.extents)}")
        if len(self.nodes) != self.dim or len(self.boundaries) != self.dim:
            raise ValueError("extents, nodes and boundaries must have equal length")
        for b in self.boundaries:
            if b not in (PERIODIC, WALL):
                raise ValueError(f"boundary kind must be 'periodic' or 'wall', got {b!r}")
        for n in self.nodes:
            if n < 3:
                raise ValueError(f"need at least 3 nodes per axis, got {n}")
        for e in self.extents:
            if e <= 0:
                raise ValueError(f"extent must be positive, got {e}")
        if self.time_nodes != 1 and self.time_nodes < 3:
            raise ValueError("time_nodes must be 1 (steady) or >= 3")
        if self.time_nodes > 1 and self.dt <= 0:
            raise ValueError("unsteady grid needs dt > 0")

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def steady(self) -> bool:
        return self.time_nodes == 1

    @property
    def tau(self) -> float:
        return (self.time_nodes - 1) * self.dt if self.time_nodes > 1 else 0.0

    def spacing(self, axis: int) -> float:
        n, e = self.nodes[axis], self.extents[axis]
        return e / n if self.boundaries[axis] == PERIODIC else e / (n - 1)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(self.spacing(a) for a in range(self.dim))

    def axis_coords(self, axis: int) -> np.ndarray:
        h = self.spacing(axis)
        return np.arange(self.nodes[axis]) * h

    def time_coords(self) -> np.ndarray:
        if self.steady:
            return np.zeros(1)
        return np.arange(self.time_nodes) * self.dt

    def axis_weights(self, axis: int) -> np.ndarray:
        """1D quadrature weights: rectangle rule (periodic) or trapezoid (wall)."""
        h = self.spacing(axis)
        w = np.full(self.nodes[axis], h)
        if self.boundaries[axis] == WALL:
            w[0] = w[-1] = h / 2
        return w

    def space_weights(self) -> np.ndarray:
        """Tensor-product spatial quadrature weights, shape ``self.nodes``."""
        w = self.axis_weights(0)
        for a in range(1, self.dim):
            w = np.multiply.outer(w, self.axis_weights(a))
        return w

    def time_weights(self) -> np.ndarray:
        if self.steady:
            return np.ones(1)
        w = np.full(self.time_nodes, self.dt)
        w[0] = w[-1] = self.dt / 2
        return w

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays (space + time), each broadcast to full field shape."""
        axes = [self.axis_coords(a) for a in range(self.dim)] + [self.time_coords()]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @property
    def shape(self) -> tuple[int, ...]:
        return (*self.nodes, self.time_nodes)


def periodic_square(n: int, extent: float = 2 * np.pi, time_nodes: int = 1,
                    dt: float = 0.0) -> Grid:
    """2D all-periodic square grid, the workhorse for Taylor-Green checks."""
    return Grid((extent, extent), (n, n), (PERIODIC, PERIODIC), time_nodes, dt)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != self.grid.shape:
            raise ValueError(
                f"field shape {v.shape} does not match grid shape {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "ScalarField":
        """Sample ``fn(x0[, x1[, x2]], t)`` on every node."""
        return cls(grid, np.asarray(fn(*grid.meshes()), dtype=float) + np.zeros(grid.shape))


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != self.grid.dim:
            raise ValueError(
                f"vector field needs {self.grid.dim} components, got {len(self.components)}")
        for c in self.components:
            if c.grid != self.grid:
                raise ValueError("vector components must share the grid")

    def __getitem__(self, i: int) -> ScalarField:
        return self.components[i]

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, tuple(ScalarField.zeros(grid) for _ in range(grid.dim)))

    @classmethod
    def from_functions(cls, grid: Grid, fns: Sequence[Callable]) -> "VectorField":
        return cls(grid, tuple(ScalarField.from_function(grid, f) for f in fns))


@dataclass(frozen=True)
class FieldQuartet:
    """The four unknown fields of the dual variational problem."""

    u: VectorField
    p: ScalarField
    w: VectorField
    r: ScalarField

    def __post_init__(self):
        g = self.u.grid
        if not (self.p.grid == g and self.w.grid == g and self.r.grid == g):
            raise ValueError("all quartet fields must share the same grid")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "FieldQuartet":
        return cls(VectorField.zeros(grid), ScalarField.zeros(grid),
                   VectorField.zeros(grid), ScalarField.zeros(grid))

    def swapped(self) -> "FieldQuartet":
        """Interchange (u, p) with (w, r)."""
        return FieldQuartet(self.w, self.r, self.u, self.p)


# ---------------------------------------------------------------------------
# stencil kernels on raw arrays
# ---------------------------------------------------------------------------

def _d1(arr: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Second-order first derivative along one axis."""
    if arr.shape[axis] < 3:
        raise ValueError("first-derivative stencil needs at least 3 nodes")
    if periodic:
        return (np.roll(arr, -1, axis) - np.roll(arr, 1, axis)) / (2 * h)
    out = np.empty_like(arr)
    sl = lambda i: tuple(i if a == axis else slice(None) for a in range(arr.ndim))
    out[sl(slice(1, -1))] = (arr[sl(slice(2, None))] - arr[sl(slice(None, -2))]) / (2 * h)
    out[sl(0)] = (-3 * arr[sl(0)] + 4 * arr[sl(1)] - arr[sl(2)]) / (2 * h)
    out[sl(-1)] = (3 * arr[sl(-1)] - 4 * arr[sl(-2)] + arr[sl(-3)]) / (2 * h)
    return out


def _d2(arr: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Second derivative along one axis; one-sided 4-point closure at walls."""
    if arr.shape[axis] < 3:
        raise ValueError("second-derivative stencil needs at least 3 nodes")
    if periodic:
        return (np.roll(arr, -1, axis) - 2 * arr + np.roll(arr, 1, axis)) / h**2
    out = np.empty_like(arr)
    sl = lambda i: tuple(i if a == axis else slice(None) for a in range(arr.ndim))
    out[sl(slice(1, -1))] = (arr[sl(slice(2, None))] - 2 * arr[sl(slice(1, -1))]
                             + arr[sl(slice(None, -2))]) / h**2
    if arr.shape[axis] >= 4:
        out[sl(0)] = (2 * arr[sl(0)] - 5 * arr[sl(1)] + 4 * arr[sl(2)] - arr[sl(3)]) / h**2
        out[sl(-1)] = (2 * arr[sl(-1)] - 5 * arr[sl(-2)] + 4 * arr[sl(-3)] - arr[sl(-4)]) / h**2
    else:
        # minimal 3-node axis: fall back to the symmetric interior stencil
        out[sl(0)] = (arr[sl(0)] - 2 * arr[sl(1)] + arr[sl(2)]) / h**2
        out[sl(-1)] = out[sl(0)]
    return out


# ---------------------------------------------------------------------------
# differential operators and quadrature
# ---------------------------------------------------------------------------

def gradient(f: ScalarField, axis: int) -> ScalarField:
    """Spatial derivative of ``f`` along ``axis``.

    Central second order in the interior, one-sided second order at wall
    boundaries, wraparound on periodic axes.
    """
    g = f.grid
    if not 0 <= axis < g.dim:
        raise ValueError(f"axis {axis} out of range for dim {g.dim}")
    vals = _d1(f.values, axis, g.spacing(axis), g.boundaries[axis] == PERIODIC)
    return ScalarField(g, vals)


def divergence(v: VectorField) -> ScalarField:
    out = gradient(v[0], 0).values
    for a in range(1, v.grid.dim):
        out = out + gradient(v[a], a).values
    return ScalarField(v.grid, out)


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    out = np.zeros(g.shape)
    for a in range(g.dim):
        out += _d2(f.values, a, g.spacing(a), g.boundaries[a] == PERIODIC)
    return ScalarField(g, out)


def time_derivative(f: ScalarField) -> ScalarField:
    g = f.grid
    if g.time_nodes < 3:
        raise ValueError("time derivative needs at least 3 time nodes")
    return ScalarField(g, _d1(f.values, f.values.ndim - 1, g.dt, periodic=False))


def integrate_space(f: ScalarField, time_index: int = 0) -> float:
    """Spatial quadrature of one time slice (trapezoid on wall axes,
    rectangle rule on periodic axes)."""
    g = f.grid
    if not -g.time_nodes <= time_index < g.time_nodes:
        raise ValueError(f"time index {time_index} out of range")
    return float(np.sum(g.space_weights() * f.values[..., time_index]))


def integrate_spacetime(f: ScalarField) -> float:
    g = f.grid
    slices = np.tensordot(g.space_weights(), f.values, axes=(tuple(range(g.dim)),
                                                             tuple(range(g.dim))))
    return float(np.dot(g.time_weights(), slices))


def slice_integrals(f: ScalarField) -> np.ndarray:
    """Spatial integral of every time slice, as one array."""
    g = f.grid
    return np.tensordot(g.space_weights(), f.values,
                        axes=(tuple(range(g.dim)), tuple(range(g.dim))))


def wall_faces(grid: Grid):
    """Yield (axis, side, sign) for every wall face; side is 0 or -1."""
    for a in range(grid.dim):
        if grid.boundaries[a] == WALL:
            yield a, 0, -1.0
            yield a, -1, 1.0


def _face_weights(grid: Grid, axis: int) -> np.ndarray:
    """Quadrature weights over a boundary face normal to ``axis``."""
    others = [grid.axis_weights(a) for a in range(grid.dim) if a != axis]
    if not others:
        return np.ones(())
    w = others[0]
    for nxt in others[1:]:
        w = np.multiply.outer(w, nxt)
    return w


def boundary_integral(flux: VectorField, time_index: int = 0) -> float:
    """Surface quadrature of ``flux . n`` over all wall faces of one slice.

    Zero (no faces) on an all-periodic grid.
    """
    g = flux.grid
    total = 0.0
    for axis, side, sign in wall_faces(g):
        comp = flux[axis].values[..., time_index]
        face = np.take(comp, side, axis=axis)
        total += sign * float(np.sum(_face_weights(g, axis) * face))
    return total


# ---------------------------------------------------------------------------
# small shared helpers
# ---------------------------------------------------------------------------

def field_scale(*fields) -> float:
    """Magnitude proxy used to scale 'machine precision' tolerances."""
    peak = 0.0
    for f in fields:
        if isinstance(f, VectorField):
            peak = max(peak, *(float(np.max(np.abs(c.values))) for c in f.components))
        else:
            peak = max(peak, float(np.max(np.abs(f.values))))
    return max(peak, 1e-300)

