"""Dual-field space-time functional: evaluation, variation, residuals, energy.

The functional pairs the physical fields (u, p) with adjoint partners (w, r)
through a node-wise antisymmetric Lagrangian density. Everything here is
organized around that antisymmetry: the density is coded as
``half(u,p,w,r) - half(w,r,u,p)``, so the interchange of the two field pairs
negates every value bit-for-bit and the u=w, p=r configuration gives exactly
zero.

The first variation is assembled as the exact linearization of the discrete
functional (the pre-integration-by-parts form), which makes it agree with
central finite differences of the evaluated functional to roundoff rather
than to discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import (
    FieldQuartet,
    Grid,
    ScalarField,
    VectorField,
    divergence,
    field_scale,
    gradient,
    integrate_spacetime,
    laplacian,
    slice_integrals,
    time_derivative,
    wall_faces,
)


class AdmissibilityError(ValueError):
    """A variation direction violates the admissible-function conditions."""


@dataclass(frozen=True)
class LagrangianReport:
    J: float
    slice_values: np.ndarray = field(repr=False)
    viscous: float
    advective: float
    pressure: float
    temporal: float
    scale: float

    def breakdown(self) -> dict[str, float]:
        return {"viscous": self.viscous, "advective": self.advective,
                "pressure": self.pressure, "temporal": self.temporal}


@dataclass(frozen=True)
class ELResiduals:
    res_div_u: ScalarField
    res_div_w: ScalarField
    res_u: VectorField
    res_w: VectorField

    def max_norm(self) -> float:
        vals = [np.max(np.abs(self.res_div_u.values)), np.max(np.abs(self.res_div_w.values))]
        vals += [np.max(np.abs(c.values)) for c in self.res_u.components]
        vals += [np.max(np.abs(c.values)) for c in self.res_w.components]
        return float(max(vals))


@dataclass(frozen=True)
class DifferencePair:
    v_bar: VectorField
    q_bar: ScalarField


@dataclass(frozen=True)
class EnergySeries:
    times: np.ndarray
    E: np.ndarray
    m: float
    rhs: np.ndarray
    identity_mismatch: np.ndarray  # interior time nodes only


@dataclass(frozen=True)
class GronwallReport:
    pointwise_ok: bool
    min_pointwise_margin: float
    tolerance: float
    weighted_profile: np.ndarray
    min_forward_difference: float


# ---------------------------------------------------------------------------
# density terms
# ---------------------------------------------------------------------------

def _grad_tensor(v: VectorField) -> list[list[np.ndarray]]:
    """G[i][j] = d v_i / d x_j as raw arrays."""
    d = v.grid.dim
    return [[gradient(v[i], j).values for j in range(d)] for i in range(d)]


def _half_terms(u: VectorField, p: ScalarField, w: VectorField, r: ScalarField,
                nu: float, include_time: bool):
    """The four positive-half density terms, as node arrays.

    The negative half is this function applied to the swapped arguments.
    """
    g = u.grid
    d = g.dim
    Du = _grad_tensor(u)
    Dw = _grad_tensor(w)
    Dp = [gradient(p, j).values for j in range(d)]
    uv = [c.values for c in u.components]
    wv = [c.values for c in w.components]

    viscous = (nu / 2) * sum(Du[i][j] ** 2 for i in range(d) for j in range(d))
    advective = 0.5 * sum((wv[i] + uv[i]) * uv[j] * Dw[i][j]
                          for i in range(d) for j in range(d))
    pressure = sum(uv[i] * Dp[i] for i in range(d))
    if include_time:
        dtw = [time_derivative(w[i]).values for i in range(d)]
        temporal = 0.5 * sum(uv[i] * dtw[i] for i in range(d))
    else:
        temporal = np.zeros(g.shape)
    return viscous, advective, pressure, temporal


def lagrangian_terms(state: FieldQuartet, nu: float, include_time: bool = True):
    """Net per-term density arrays (positive half minus swapped half)."""
    pos = _half_terms(state.u, state.p, state.w, state.r, nu, include_time)
    neg = _half_terms(state.w, state.r, state.u, state.p, nu, include_time)
    return tuple(a - b for a, b in zip(pos, neg)), pos, neg


def evaluate_lagrangian(state: FieldQuartet, nu: float) -> LagrangianReport:
    """Evaluate the space-time functional and its term breakdown.

    Requires an unsteady grid; use :func:`varns.steady.steady_functional` for
    the time-independent variant.
    """
    if nu < 0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    g = state.grid
    if g.steady:
        raise ValueError("evaluate_lagrangian needs an unsteady grid; "
                         "see steady_functional for steady problems")
    net, pos, neg = lagrangian_terms(state, nu, include_time=True)
    density = ScalarField(g, net[0] + net[1] + net[2] + net[3])
    slices = slice_integrals(density)
    J = float(np.dot(g.time_weights(), slices))
    parts = [integrate_spacetime(ScalarField(g, t)) for t in net]
    scale = sum(integrate_spacetime(ScalarField(g, np.abs(t)))
                for t in (*pos, *neg))
    return LagrangianReport(J, slices, parts[0], parts[1], parts[2], parts[3],
                            max(scale, 1e-300))


def swap_functional(state: FieldQuartet, nu: float) -> float:
    """Functional value with (u, p) and (w, r) interchanged; equals -J."""
    return evaluate_lagrangian(state.swapped(), nu).J


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals
# ---------------------------------------------------------------------------

def el_residuals(state: FieldQuartet, nu: float) -> ELResiduals:
    """Node-wise residuals of the coupled stationarity system.

    Momentum rows use the symmetrized advection form (the one consistent with
    the functional's own linearization). On a steady grid the time-derivative
    terms are omitted.
    """
    if nu < 0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    g = state.grid
    d = g.dim
    uv = [c.values for c in state.u.components]
    wv = [c.values for c in state.w.components]
    Du = _grad_tensor(state.u)
    Dw = _grad_tensor(state.w)
    Dp = [gradient(state.p, j).values for j in range(d)]
    Dr = [gradient(state.r, j).values for j in range(d)]
    if g.steady:
        dtu = dtw = [np.zeros(g.shape)] * d
    else:
        dtu = [time_derivative(state.u[i]).values for i in range(d)]
        dtw = [time_derivative(state.w[i]).values for i in range(d)]

    res_u, res_w = [], []
    for i in range(d):
        adv_u = sum(0.5 * (uv[j] + wv[j]) * (Dw[i][j] + Dw[j][i]) for j in range(d))
        adv_w = sum(0.5 * (wv[j] + uv[j]) * (Du[i][j] + Du[j][i]) for j in range(d))
        res_u.append(nu * laplacian(state.u[i]).values - Dp[i] - dtw[i] - adv_u)
        res_w.append(nu * laplacian(state.w[i]).values - Dr[i] - dtu[i] - adv_w)
    mk = lambda arrs: VectorField(g, tuple(ScalarField(g, a) for a in arrs))
    return ELResiduals(divergence(state.u), divergence(state.w),
                       mk(res_u), mk(res_w))


# ---------------------------------------------------------------------------
# first variation
# ---------------------------------------------------------------------------

def _wall_boundary_mask(grid: Grid) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for axis, side, _ in wall_faces(grid):
        idx = tuple(side if a == axis else slice(None) for a in range(grid.dim))
        mask[idx + (slice(None),)] = True
    return mask


def check_admissible_direction(direction: FieldQuartet) -> None:
    """Enforce the admissible-variation class for the unsteady functional.

    Wall boundaries: velocity directions vanish, pressure directions agree.
    Time ends: the u- and w-directions must coincide at both end slices.
    """
    g = direction.grid
    tol = 1e-12 * field_scale(direction.u, direction.w, direction.p, direction.r)
    mask = _wall_boundary_mask(g)
    if mask.any():
        for name, vec in (("u", direction.u), ("w", direction.w)):
            worst = max(float(np.max(np.abs(c.values[mask]))) for c in vec.components)
            if worst > tol:
                raise AdmissibilityError(
                    f"direction.{name} must vanish on wall boundaries "
                    f"(worst violation {worst:.3e})")
        gap = float(np.max(np.abs(direction.p.values[mask] - direction.r.values[mask])))
        if gap > tol:
            raise AdmissibilityError(
                f"direction.p and direction.r must agree on wall boundaries "
                f"(worst violation {gap:.3e})")
    if not g.steady:
        for k in (0, g.time_nodes - 1):
            gap = max(float(np.max(np.abs(cu.values[..., k] - cw.values[..., k])))
                      for cu, cw in zip(direction.u.components, direction.w.components))
            if gap > tol:
                raise AdmissibilityError(
                    f"direction.u and direction.w must coincide at time slice {k} "
                    f"(worst violation {gap:.3e})")


def _half_linearized(u, p, w, r, du, dp, dw, dr, nu: float, include_time: bool):
    """Exact linearization of the positive-half density in a direction."""
    g = u.grid
    d = g.dim
    Du, Dw = _grad_tensor(u), _grad_tensor(w)
    Ddu, Ddw = _grad_tensor(du), _grad_tensor(dw)
    Dp = [gradient(p, j).values for j in range(d)]
    Ddp = [gradient(dp, j).values for j in range(d)]
    uv = [c.values for c in u.components]
    wv = [c.values for c in w.components]
    duv = [c.values for c in du.components]
    dwv = [c.values for c in dw.components]

    out = nu * sum(Du[i][j] * Ddu[i][j] for i in range(d) for j in range(d))
    out = out + 0.5 * sum((dwv[i] + duv[i]) * uv[j] * Dw[i][j]
                          + (wv[i] + uv[i]) * duv[j] * Dw[i][j]
                          + (wv[i] + uv[i]) * uv[j] * Ddw[i][j]
                          for i in range(d) for j in range(d))
    out = out + sum(duv[i] * Dp[i] + uv[i] * Ddp[i] for i in range(d))
    if include_time:
        dtw = [time_derivative(w[i]).values for i in range(d)]
        dtdw = [time_derivative(dw[i]).values for i in range(d)]
        out = out + 0.5 * sum(duv[i] * dtw[i] + uv[i] * dtdw[i] for i in range(d))
    return out


def first_variation(state: FieldQuartet, direction: FieldQuartet, nu: float) -> float:
    """Directional derivative of the functional at ``state`` along ``direction``.

    Assembled from the exact term-by-term linearization of the discrete
    density, using the same stencils and quadrature as the evaluation, so the
    value matches [J(s + eps d) - J(s - eps d)] / (2 eps) up to O(eps^2) with
    no discretization gap. The direction must be admissible.
    """
    if nu < 0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    g = state.grid
    if g.steady:
        raise ValueError("first_variation needs an unsteady grid")
    if direction.grid != g:
        raise ValueError("state and direction must share the grid")
    check_admissible_direction(direction)
    s, dirn = state, direction
    pos = _half_linearized(s.u, s.p, s.w, s.r, dirn.u, dirn.p, dirn.w, dirn.r,
                           nu, include_time=True)
    neg = _half_linearized(s.w, s.r, s.u, s.p, dirn.w, dirn.r, dirn.u, dirn.p,
                           nu, include_time=True)
    return integrate_spacetime(ScalarField(g, pos - neg))


# ---------------------------------------------------------------------------
# difference fields and the energy series
# ---------------------------------------------------------------------------

def difference_fields(state: FieldQuartet) -> DifferencePair:
    g = state.grid
    vbar = VectorField(g, tuple(
        ScalarField(g, (cu.values - cw.values) / 2)
        for cu, cw in zip(state.u.components, state.w.components)))
    qbar = ScalarField(g, (state.p.values - state.r.values) / 2)
    return DifferencePair(vbar, qbar)


def _sym_eig_max(D: list[list[np.ndarray]], dim: int) -> float:
    """Max eigenvalue over all nodes of a symmetric tensor field, closed form."""
    if dim == 1:
        return float(np.max(D[0][0]))
    if dim == 2:
        a, b, c = D[0][0], D[1][1], D[0][1]
        lam = (a + b) / 2 + np.sqrt(((a - b) / 2) ** 2 + c ** 2)
        return float(np.max(lam))
    a, b, c = D[0][0], D[1][1], D[2][2]
    d, e, f = D[0][1], D[0][2], D[1][2]
    p1 = d ** 2 + e ** 2 + f ** 2
    q = (a + b + c) / 3
    p2 = (a - q) ** 2 + (b - q) ** 2 + (c - q) ** 2 + 2 * p1
    p = np.sqrt(np.maximum(p2, 0.0) / 6)
    safe = np.where(p > 0, p, 1.0)
    B11, B22, B33 = (a - q) / safe, (b - q) / safe, (c - q) / safe
    B12, B13, B23 = d / safe, e / safe, f / safe
    detB = (B11 * (B22 * B33 - B23 ** 2) - B12 * (B12 * B33 - B23 * B13)
            + B13 * (B12 * B23 - B22 * B13))
    rr = np.clip(detB / 2, -1.0, 1.0)
    lam = q + 2 * p * np.cos(np.arccos(rr) / 3)
    lam = np.where(p > 0, lam, np.maximum(np.maximum(a, b), c))
    return float(np.max(lam))


def deformation_eigenvalue(forcing: VectorField) -> float:
    """Largest eigenvalue of sym-grad of the forcing flow over all nodes."""
    d = forcing.grid.dim
    G = _grad_tensor(forcing)
    D = [[0.5 * (G[i][j] + G[j][i]) for j in range(d)] for i in range(d)]
    return _sym_eig_max(D, d)


def energy_series(state: FieldQuartet, nu: float) -> EnergySeries:
    """Difference-field energy, the energy-balance right side as printed, and
    the deformation-eigenvalue bound.

    ``rhs(t) = 2 int [ nu |grad vbar|^2 - (vbar_i vbar_j / 2) d_i (u_j+w_j) ]``
    and the mismatch compares it with central time differences of E(t) at
    interior time nodes. Wall boundaries require vbar = 0.
    """
    if nu < 0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    g = state.grid
    d = g.dim
    pair = difference_fields(state)
    vb = [c.values for c in pair.v_bar.components]

    mask = _wall_boundary_mask(g)
    if mask.any():
        worst = max(float(np.max(np.abs(c[mask]))) for c in vb)
        tol = 1e-12 * field_scale(state.u, state.w)
        if worst > tol:
            flat = int(np.argmax(sum(np.abs(c) * mask for c in vb)))
            where = np.unravel_index(flat, g.shape)
            raise ValueError(
                "difference field must vanish on wall boundaries; worst node "
                f"{where} with |vbar| = {worst:.3e}")

    forcing = VectorField(g, tuple(
        ScalarField(g, cu.values + cw.values)
        for cu, cw in zip(state.u.components, state.w.components)))
    Dv = _grad_tensor(pair.v_bar)
    Dg = _grad_tensor(forcing)

    E = slice_integrals(ScalarField(g, sum(c ** 2 for c in vb)))
    integrand = nu * sum(Dv[i][j] ** 2 for i in range(d) for j in range(d)) \
        - 0.5 * sum(vb[i] * vb[j] * Dg[j][i] for i in range(d) for j in range(d))
    rhs = 2 * slice_integrals(ScalarField(g, integrand))

    if g.time_nodes >= 3:
        dEdt = (E[2:] - E[:-2]) / (2 * g.dt)
        mismatch = np.abs(dEdt - rhs[1:-1])
    else:
        mismatch = np.zeros(0)
    m = deformation_eigenvalue(forcing)
    return EnergySeries(g.time_coords(), E, m, rhs, mismatch)


def gronwall_audit(series: EnergySeries, tol: float = 1e-10) -> GronwallReport:
    """Check the pointwise inequality rhs(t) >= -2 m E(t) and report the
    monotonicity profile of E(t) exp(2 m t).

    The pointwise inequality is implied by the eigenvalue definition of m
    whenever the quadrature weights are nonnegative, so it is asserted; the
    profile is reported without a sign contract.
    """
    scale = max(1.0, float(np.max(np.abs(series.rhs), initial=0.0)),
                2 * abs(series.m) * float(np.max(series.E, initial=0.0)))
    margins = series.rhs + 2 * series.m * series.E
    min_margin = float(np.min(margins)) if margins.size else 0.0
    profile = series.E * np.exp(2 * series.m * series.times)
    min_fwd = float(np.min(np.diff(profile))) if profile.size > 1 else 0.0
    return GronwallReport(min_margin >= -tol * scale, min_margin, tol * scale,
                          profile, min_fwd)
