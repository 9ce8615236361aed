"""Named field scenarios shared by the command-line runner.

``zero`` and ``taylor-green`` are self-describing; ``random:<seed>`` builds a
smooth low-wavenumber quartet whose difference field vanishes on wall
boundaries (so the energy and audit operations accept it); ``file:<dir>``
reads a quartet dumped in the snapshot CSV format.
"""

from __future__ import annotations

import numpy as np

from .grids import PERIODIC, FieldQuartet, Grid, ScalarField, VectorField
from .solver import taylor_green


def _smooth_scalar(rng: np.random.Generator, grid: Grid,
                   wall_vanishing: bool = False) -> np.ndarray:
    """Random low-mode trigonometric field; optionally zero on wall faces."""
    meshes = grid.meshes()
    coords, t = meshes[:-1], meshes[-1]
    out = np.zeros(grid.shape)
    for _ in range(4):
        term = np.ones(grid.shape) * rng.normal()
        for a, x in enumerate(coords):
            scale = 2 * np.pi / grid.extents[a]
            k = int(rng.integers(0, 3))
            if grid.boundaries[a] == PERIODIC:
                term = term * np.sin(k * scale * x + rng.normal())
            elif wall_vanishing:
                term = term * np.sin((k + 1) * np.pi * x / grid.extents[a])
            else:
                term = term * np.cos(k * np.pi * x / grid.extents[a] + rng.normal())
        if not grid.steady:
            term = term * np.cos(0.7 * rng.normal() * t + rng.normal())
        out += term
    return out


def random_quartet(grid: Grid, seed: int) -> FieldQuartet:
    """Smooth random quartet with a wall-vanishing difference field.

    On grids with wall axes the velocity fields themselves vanish on the
    walls, so the quartet is mass-compatible surface data and an admissible
    state (u = w = 0 on the boundary) for the audits.
    """
    rng = np.random.default_rng(seed)
    walls = any(b != PERIODIC for b in grid.boundaries)
    base = [_smooth_scalar(rng, grid, wall_vanishing=walls) for _ in range(grid.dim)]
    diff = [_smooth_scalar(rng, grid, wall_vanishing=True) for _ in range(grid.dim)]
    u = [base[i] + diff[i] for i in range(grid.dim)]
    w = [base[i] - diff[i] for i in range(grid.dim)]
    mkv = lambda arrs: VectorField(grid, tuple(ScalarField(grid, a) for a in arrs))
    return FieldQuartet(mkv(u), ScalarField(grid, _smooth_scalar(rng, grid)),
                        mkv(w), ScalarField(grid, _smooth_scalar(rng, grid)))


def build_scenario(name: str, grid: Grid, nu: float) -> FieldQuartet:
    if name == "zero":
        return FieldQuartet.zeros(grid)
    if name == "taylor-green":
        return taylor_green(nu, grid)
    if name.startswith("random:"):
        return random_quartet(grid, int(name.split(":", 1)[1]))
    if name.startswith("file:"):
        from .reports import read_quartet_csv
        return read_quartet_csv(name.split(":", 1)[1], grid)
    raise ValueError(
        f"unknown scenario {name!r}; expected zero, taylor-green, "
        "random:<seed> or file:<path>")
