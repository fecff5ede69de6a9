"""Homogenized references for the separate case and their structural checks.

solve_limit_separate marches the family of conservation laws
d_t u + div_x(c(y) g(u)) = 0 with c = the projected advection coefficients,
one independent row per cell point.  check_constraint_invariance measures how
well the rows stay inside the constraint space; check_multiplier_sign pairs
the discrete kinetic residual of the evolution against admissible multiplier
test functions (nondecreasing in the kinetic variable, annihilated by the
microscopic operator), mollified in (t, x) with a past-supported kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cells import _forward_div, _y_mesh
from .fluxes import FluxModel
from .fv import SolverConfig, Trajectory, solve_parametric
from .grids import Grid, MacroField, chi_profile
from .projections import ConstraintSpace, project_vector_field


@dataclass
class LimitSolution:
    trajectory: Trajectory
    coefficients: list            # projected advection coefficients per axis
    prep_residual: float


def solve_limit_separate(u0: MacroField, model: FluxModel, space: ConstraintSpace,
                         cfg: SolverConfig, out_times,
                         prep_tol: float | None = None) -> LimitSolution:
    """Project the coefficients, then run independent per-row solves.

    prep_tol, when given, rejects initial data whose per-point constraint
    residual exceeds it (well-preparedness check on entry).
    """
    grid = u0.grid
    resid = space.residual(u0.values.reshape((-1,) + grid.y_cells))
    if prep_tol is not None and resid > prep_tol:
        raise ValueError(f"initial data is not well-prepared: residual {resid:.3e} > {prep_tol:.3e}")
    coeffs = project_vector_field(model, space)
    traj = solve_parametric(u0, coeffs, model.separate, cfg, out_times)
    return LimitSolution(traj, coeffs, resid)


def check_constraint_invariance(sol: LimitSolution | Trajectory, model: FluxModel,
                                grid: Grid, use_chi: bool = False) -> list[float]:
    """Per-output-time worst-over-x constraint residual of the solution.

    Measures div_y(a0 g(u(t, x, .))) with the forward-difference stencil; with
    use_chi the profile chi(xi, u) replaces g(u) (the kinetic-form membership
    test), adding a kinetic axis before the divergence.
    """
    traj = sol.trajectory if isinstance(sol, LimitSolution) else sol
    ny = len(grid.y_cells)
    nx = len(grid.x_cells)
    ymesh = _y_mesh(grid)
    series = []
    for f in traj.fields:
        u = f.values
        if use_chi:
            prof = chi_profile(u, grid)  # (x..., y..., xi)
            yb = tuple(c[(None,) * nx + (...,) + (None,)] for c in ymesh)
            comps = [model.separate.a0[d](*[c[..., 0] for c in yb])[..., None] * prof
                     for d in range(ny)]
            div = _forward_div(comps, grid, first_axis=nx)
            resid = np.abs(div).mean(axis=tuple(range(nx, div.ndim)))
        else:
            g_of_u = model.separate.g(u)
            yb = tuple(c[(None,) * nx + (...,)] for c in ymesh)
            comps = [model.separate.a0[d](*yb) * g_of_u for d in range(ny)]
            div = _forward_div(comps, grid, first_axis=nx)
            resid = np.abs(div).mean(axis=tuple(range(nx, div.ndim)))
        series.append(float(resid.max()))
    return series


# ---------------------------------------------------------------------------
# admissible multiplier test functions and the sign check
# ---------------------------------------------------------------------------

def multiplier_test_functions(grid: Grid, count: int = 10, seed: int = 11,
                              y2_weight: bool = True) -> list[np.ndarray]:
    """Bounded profiles nondecreasing in xi on the (y..., xi) lattice.

    Smoothed steps at spread positions, optionally modulated by a positive
    profile in the last cell direction (admissible for shear-structured
    fluxes, whose microscopic operator ignores that direction).
    """
    rng = np.random.default_rng(seed)
    xi = grid.xi_centers()
    ny = len(grid.y_cells)
    out = []
    for i in range(count):
        if i == 0:
            ramp = np.ones_like(xi)
        else:
            xi0 = rng.uniform(-0.8, 0.8) * grid.support_bound
            width = rng.uniform(0.5, 3.0) * grid.dxi
            ramp = np.tanh((xi - xi0) / width)
        psi = np.broadcast_to(ramp, grid.y_cells + (grid.xi_cells,)).copy()
        if y2_weight and ny and i % 3 == 2:
            y_last = grid.y_centers(ny - 1)
            mod = 1.0 + 0.5 * np.cos(2 * np.pi * y_last)
            psi = psi * mod.reshape((1,) * (ny - 1) + (-1, 1))
        out.append(psi)
    return out


def past_mollifier(n_t: int, n_x: int):
    """Discrete product kernel: past-supported bump in t, symmetric bump in x."""
    s = (np.arange(1, n_t + 1)) / (n_t + 1)  # in (0,1); kernel at t - s
    wt = np.exp(-1.0 / np.clip(1.0 - (2 * s - 1.0) ** 2, 1e-12, None))
    wt /= wt.sum()
    r = np.arange(-n_x, n_x + 1) / (n_x + 1)
    wx = np.exp(-1.0 / np.clip(1.0 - r ** 2, 1e-12, None))
    wx /= wx.sum()
    return wt, wx


@dataclass
class MultiplierSignReport:
    pairings: np.ndarray          # (n_psi, n_probes)
    probes: list                  # (time index, x multi-index) per probe
    tol: float
    max_pairing: float
    conservation_gap: float       # d/dt of total mass under the kinetic march


def check_multiplier_sign(u0: MacroField, model: FluxModel, space: ConstraintSpace,
                          cfg: SolverConfig, psis: Sequence[np.ndarray],
                          n_probes: int = 50, seed: int = 23,
                          moll_steps: int = 8, moll_cells: int = 4,
                          coeffs: Sequence[np.ndarray] | None = None) -> MultiplierSignReport:
    """March the kinetic form of the per-row solver and pair its residual.

    The evolution residual of one sweep is [chi(xi, u_new) - f_pre]/dt, where
    f_pre is the upwind kinetic transport of chi(xi, u); its pairing against
    any profile nondecreasing in xi is nonpositive because the level profile
    minimizes the pairing among profiles with the same moment.  The macroscopic
    update is taken as the moment of f_pre (kinetic quadrature of the
    Engquist-Osher flux), so the sign holds exactly, and the mollified pairing
    inherits it.
    """
    grid = u0.grid
    nx = len(grid.x_cells)
    ny = len(grid.y_cells)
    if coeffs is None:
        coeffs = project_vector_field(model, space)
    gp = model.separate.g_prime(grid.xi_centers())
    speeds = [np.asarray(coeffs[d])[..., None] * gp for d in range(nx)]  # (y..., xi)
    sup = max(float(np.max(np.abs(s))) for s in speeds)
    dt = cfg.cfl * min(grid.dx) / sup
    n_steps = max(1, int(np.ceil(cfg.t_end / dt)))
    dt = cfg.t_end / n_steps

    measure_yxi = float(np.prod(grid.dy)) * grid.dxi
    u = u0.values.copy()
    pair_series = []   # per step: (n_psi,) + x_cells
    mass_series = [float(u.sum())]
    psi_flat = np.stack([p.reshape(-1) for p in psis])  # (n_psi, yxi)

    for _ in range(n_steps):
        pair_step = np.zeros((len(psis),) + grid.x_cells)
        for d in range(nx):
            prof = chi_profile(u, grid)          # (x..., y..., xi)
            c = speeds[d][(None,) * nx + (...,)]
            lam = dt / grid.dx[d]
            f_pre = prof - lam * (np.maximum(c, 0.0) * (prof - np.roll(prof, 1, axis=d))
                                  + np.minimum(c, 0.0) * (np.roll(prof, -1, axis=d) - prof))
            u_new = grid.dxi * f_pre.sum(axis=-1)
            resid = (chi_profile(u_new, grid) - f_pre) / dt
            flat = resid.reshape(grid.x_cells + (-1,))
            pair_step += np.einsum("...k,pk->p...", flat, psi_flat) * measure_yxi
            u = u_new
        pair_series.append(pair_step)
        mass_series.append(float(u.sum()))

    pair_arr = np.stack(pair_series)  # (n_steps, n_psi, x...)
    wt, wx = past_mollifier(moll_steps, moll_cells)
    # mollify in time (past-supported: value at step n averages steps n-1..n-moll)
    n_keep = pair_arr.shape[0]
    moll_t = np.zeros_like(pair_arr)
    for j, w in enumerate(wt):
        shift = j + 1
        idx = np.arange(n_keep) - shift
        idx = np.clip(idx, 0, None)
        moll_t += w * pair_arr[idx]
    # mollify in each x direction (periodic)
    moll = moll_t
    for d in range(nx):
        axis = 2 + d
        out = np.zeros_like(moll)
        for j, w in enumerate(wx):
            out += w * np.roll(moll, j - moll_cells, axis=axis)
        moll = out

    rng = np.random.default_rng(seed)
    probes = []
    vals = np.empty((len(psis), n_probes))
    for p in range(n_probes):
        tn = int(rng.integers(moll_steps + 1, n_steps))
        xi_idx = tuple(int(rng.integers(0, grid.x_cells[d])) for d in range(nx))
        probes.append((tn, xi_idx))
        vals[:, p] = moll[(tn, slice(None)) + xi_idx]

    tol = 1e-8 + 10.0 * (min(grid.dx) + dt)
    cons = max(abs(m - mass_series[0]) for m in mass_series) * float(np.prod(grid.dx)) \
        * float(np.prod(grid.dy))
    return MultiplierSignReport(vals, probes, tol, float(vals.max()), cons)


def averaged_equation_gap(u0: MacroField, model: FluxModel, space: ConstraintSpace,
                          cfg: SolverConfig, t_end: float) -> float:
    """L1 gap at t_end between <u(t,x,.)>_Y of the limit solution and the
    solution of the naively averaged law d_t v + div(<a0> g(v)) = 0.

    Quantifies that averaging and homogenization do not commute.
    """
    grid = u0.grid
    sol = solve_limit_separate(u0, model, space, cfg, [t_end])
    u_avg = sol.trajectory.fields[-1].values.mean(
        axis=tuple(range(len(grid.x_cells), u0.values.ndim)))
    mean_coeffs = [np.full(grid.y_cells, float(a.mean())) for a in space._a0]
    v0 = MacroField(u0.values.mean(axis=tuple(range(len(grid.x_cells), u0.values.ndim)))
                    [(...,) + (None,) * len(grid.y_cells)] + np.zeros(grid.x_cells + grid.y_cells),
                    grid)
    vtraj = solve_parametric(v0, mean_coeffs, model.separate, cfg, [t_end])
    v = vtraj.fields[-1].values[(...,) + (0,) * len(grid.y_cells)]
    return float(np.abs(u_avg - v).mean())
