"""Shared builders for the test suite.

The random-field helpers here generate inputs; independent oracles live in
the test modules that use them.
"""

import numpy as np
import pytest

from varns.grids import (
    PERIODIC,
    FieldQuartet,
    ScalarField,
    VectorField,
)


def smooth_scalar(rng, grid, wall_vanishing=False):
    """Low-wavenumber random field; optionally zero on wall boundaries."""
    meshes = grid.meshes()
    coords, t = meshes[:-1], meshes[-1]
    out = np.zeros(grid.shape)
    for _ in range(4):
        term = np.ones(grid.shape) * rng.normal()
        for a, x in enumerate(coords):
            if grid.boundaries[a] == PERIODIC:
                k = int(rng.integers(0, 3))
                term = term * np.sin(k * 2 * np.pi / grid.extents[a] * x + rng.normal())
            elif wall_vanishing:
                k = int(rng.integers(1, 3))
                term = term * np.sin(k * np.pi * x / grid.extents[a])
            else:
                k = int(rng.integers(0, 3))
                term = term * np.cos(k * np.pi * x / grid.extents[a] + rng.normal())
        if not grid.steady:
            term = term * np.cos(0.7 * rng.normal() * t + rng.normal())
        out += term
    return out


def smooth_vector(rng, grid, wall_vanishing=False):
    return VectorField(grid, tuple(
        ScalarField(grid, smooth_scalar(rng, grid, wall_vanishing))
        for _ in range(grid.dim)))


def random_quartet(grid, seed, wall_safe=True):
    """Random quartet; with wall_safe the u-w difference vanishes on walls."""
    rng = np.random.default_rng(seed)
    base = [smooth_scalar(rng, grid) for _ in range(grid.dim)]
    diff = [smooth_scalar(rng, grid, wall_vanishing=wall_safe)
            for _ in range(grid.dim)]
    u = [base[i] + diff[i] for i in range(grid.dim)]
    w = [base[i] - diff[i] for i in range(grid.dim)]
    mkv = lambda arrs: VectorField(grid, tuple(ScalarField(grid, a) for a in arrs))
    return FieldQuartet(mkv(u), ScalarField(grid, smooth_scalar(rng, grid)),
                        mkv(w), ScalarField(grid, smooth_scalar(rng, grid)))


def boundary_rich_quartet(grid, seed):
    """Quartet with mass-compatible but nonzero wall traces: each velocity
    component vanishes on the walls it is normal to (zero through-flow),
    while tangential traces stay rich."""
    rng = np.random.default_rng(seed)

    def tangential(rng):
        comps = []
        for i in range(grid.dim):
            f = smooth_scalar(rng, grid)
            if grid.boundaries[i] != PERIODIC:
                x = grid.meshes()[i]
                f = f * np.sin(np.pi * x / grid.extents[i])
            comps.append(f)
        return comps

    u = tangential(rng)
    w = tangential(rng)
    mkv = lambda arrs: VectorField(grid, tuple(ScalarField(grid, a) for a in arrs))
    return FieldQuartet(mkv(u), ScalarField(grid, smooth_scalar(rng, grid)),
                        mkv(w), ScalarField(grid, smooth_scalar(rng, grid)))


def admissible_direction(grid, seed):
    """Direction in the admissible class: velocity directions vanish on
    walls, du = dw at both end time slices, dp = dr on walls."""
    rng = np.random.default_rng(seed)
    t = grid.meshes()[-1]
    env = np.sin(np.pi * t / grid.tau) if grid.tau > 0 else np.zeros(grid.shape)
    du = [smooth_scalar(rng, grid, wall_vanishing=True) for _ in range(grid.dim)]
    dw = [du[i] + env * smooth_scalar(rng, grid, wall_vanishing=True)
          for i in range(grid.dim)]
    dp = smooth_scalar(rng, grid)
    dr = dp + smooth_scalar(rng, grid, wall_vanishing=True)
    mkv = lambda arrs: VectorField(grid, tuple(ScalarField(grid, a) for a in arrs))
    return FieldQuartet(mkv(du), ScalarField(grid, dp), mkv(dw), ScalarField(grid, dr))


def shift_state(state, direction, eps):
    g = state.grid
    vec = lambda a, b: VectorField(g, tuple(
        ScalarField(g, ca.values + eps * cb.values)
        for ca, cb in zip(a.components, b.components)))
    return FieldQuartet(vec(state.u, direction.u),
                        ScalarField(g, state.p.values + eps * direction.p.values),
                        vec(state.w, direction.w),
                        ScalarField(g, state.r.values + eps * direction.r.values))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
