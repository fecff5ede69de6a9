"""Convergence metrics comparing direct oscillatory runs with limit references.

strong_convergence_metric realizes the mollified two-scale distance
||u_eps(t,x) - (u_ref *_x phi_delta)(t, x, x/eps)||_L1(K); two_scale_pairing
tests weak oscillatory convergence against separable test functions;
contraction_check measures the weighted contraction margin between two
trajectories.  All operate on stored trajectories and are pure post-processing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fv import Trajectory
from .grids import Grid, MacroField


@dataclass(frozen=True)
class MollifierSpec:
    """Compactly supported, nonnegative base kernel with unit mass, 0 <= phi <= 1.

    kind 'hat' is the product triangle on [-1,1]^N (peak 1, mass 1 per axis).
    width is the scaling delta: phi_delta(x) = delta^-N phi(x/delta).
    """

    width: float
    kind: str = "hat"

    def discrete_kernel(self, dx: float) -> np.ndarray:
        """One-axis kernel sampled on a grid of spacing dx, normalized to sum 1."""
        h = max(1, int(np.ceil(self.width / dx)) - 1)
        r = np.arange(-h, h + 1) * dx / self.width
        if self.kind == "hat":
            w = np.clip(1.0 - np.abs(r), 0.0, None)
        elif self.kind == "bump":
            w = np.exp(-1.0 / np.clip(1.0 - r ** 2, 1e-12, None))
        else:
            raise ValueError(f"unknown kernel {self.kind!r}")
        s = w.sum()
        if s <= 0:
            return np.array([1.0])
        return w / s


def _mollify_x(values: np.ndarray, grid: Grid, moll: MollifierSpec) -> np.ndarray:
    """Periodic convolution along every x axis of a field shaped x_cells + y_cells."""
    out = values
    for d in range(len(grid.x_cells)):
        k = moll.discrete_kernel(grid.dx[d])
        h = len(k) // 2
        acc = np.zeros_like(out)
        for j, w in enumerate(k):
            acc += w * np.roll(out, j - h, axis=d)
        out = acc
    return out


def _interp_axis(values: np.ndarray, axis: int, positions: np.ndarray, n: int):
    """Periodic linear interpolation along one cell-centered axis."""
    s = positions * n - 0.5
    i0 = np.floor(s).astype(np.int64)
    w = s - i0
    lo = np.take(values, np.mod(i0, n), axis=axis)
    hi = np.take(values, np.mod(i0 + 1, n), axis=axis)
    shape = [1] * lo.ndim
    shape[axis] = len(positions)
    w = w.reshape(shape)
    return lo * (1 - w) + hi * w


def _diagonal_gather(vals: np.ndarray, y_axis: int, x_axis: int, idx: np.ndarray):
    """vals indexed along y_axis by idx(i) where i is the x_axis coordinate."""
    moved = np.moveaxis(vals, y_axis, 0)[idx]       # leading axis = x_axis copy
    diag = np.diagonal(moved, axis1=0, axis2=1 + x_axis)  # diagonal moved last
    return np.moveaxis(diag, -1, x_axis)


def evaluate_two_scale(ref: MacroField, direct_grid: Grid) -> np.ndarray:
    """Sample a reference field u(t, x, y) at (x, x/eps) on the direct grid.

    Interpolates periodically: first along the reference x axes to the direct
    cell centers, then along the y axes at x/eps mod 1 (diagonal evaluation,
    the y_d coordinate tied to the x_d one).  Singleton y axes are constants.
    """
    rg = ref.grid
    eps = direct_grid.epsilon
    nx = len(direct_grid.x_cells)
    vals = ref.values
    for d in range(nx):
        xs = direct_grid.x_centers(d) / rg.x_length[d]
        vals = _interp_axis(vals, d, xs, rg.x_cells[d])
    y_axis = nx
    for d in range(len(rg.y_cells)):
        n = rg.y_cells[d]
        if n == 1:
            vals = np.squeeze(vals, axis=y_axis)
            continue
        s = np.mod(direct_grid.x_centers(d) / eps, 1.0) * n - 0.5
        i0 = np.floor(s).astype(np.int64)
        w = s - i0
        lo = _diagonal_gather(vals, y_axis, d, np.mod(i0, n))
        hi = _diagonal_gather(vals, y_axis, d, np.mod(i0 + 1, n))
        wshape = [1] * lo.ndim
        wshape[d] = len(s)
        w = w.reshape(wshape)
        vals = lo * (1 - w) + hi * w
    return vals


def central_window_mask(grid: Grid) -> np.ndarray:
    """Mask of the central half of the periodic box (per dimension)."""
    mask = np.ones(grid.x_cells, dtype=bool)
    for d in range(len(grid.x_cells)):
        c = grid.x_centers(d)
        m = (np.abs(c - grid.x_length[d] / 2) <= grid.x_length[d] / 4)
        mask = mask & m.reshape([-1 if i == d else 1 for i in range(len(grid.x_cells))])
    return mask


def strong_convergence_metric(direct: Trajectory, ref: Trajectory, moll: MollifierSpec,
                              direct_grid: Grid, window: np.ndarray | None = None) -> float:
    """Time-and-space weighted L1 distance over the compact window.

    Both trajectories must share output times.  The reference is mollified in
    x on its own grid, then evaluated at (x, x/eps) on the direct grid.
    """
    if len(direct.times) != len(ref.times):
        raise ValueError("trajectories must share output times")
    if window is None:
        window = central_window_mask(direct_grid)
    cell = float(np.prod(direct_grid.dx))
    times = direct.times
    weights = np.diff(times, prepend=times[0])
    total = 0.0
    for wt, fd, fr, td, tr in zip(weights, direct.fields, ref.fields, direct.times, ref.times):
        if abs(td - tr) > 1e-12:
            raise ValueError("output times differ between trajectories")
        if wt == 0.0:
            continue
        smoothed = MacroField(_mollify_x(fr.values, fr.grid, moll), fr.grid, fr.time)
        ref_eval = evaluate_two_scale(smoothed, direct_grid)
        total += wt * float(np.abs(fd.values - ref_eval)[window].sum()) * cell
    return total


def two_scale_pairing(direct: Trajectory, ref: Trajectory, direct_grid: Grid,
                      psi1: Callable, psi2: Callable) -> float:
    """|<u_eps, psi1 psi2(x/eps)> - <u_ref, psi1 psi2(y)>| over the trajectory.

    psi1(t, *x) is the macroscopic factor, psi2(*y) the periodic one.
    """
    g = direct_grid
    rg = ref.fields[0].grid
    nx = len(g.x_cells)
    xs = [g.x_centers(d) for d in range(nx)]
    xmesh = np.meshgrid(*xs, indexing="ij")
    ymesh_eps = [np.mod(c / g.epsilon, 1.0) for c in xmesh]
    cell_d = float(np.prod(g.dx))
    rxs = [rg.x_centers(d) for d in range(nx)]
    rxmesh = np.meshgrid(*rxs, indexing="ij")
    rymesh = np.meshgrid(*[rg.y_centers(d) for d in range(len(rg.y_cells))], indexing="ij")
    cell_r = float(np.prod(rg.dx)) * float(np.prod(rg.dy))
    times = direct.times
    weights = np.diff(times, prepend=times[0])
    lhs = rhs = 0.0
    psi2_eps = psi2(*ymesh_eps)
    nyr = len(rg.y_cells)
    psi2_ref = psi2(*rymesh) if nyr else 1.0
    for wt, fd, fr, t in zip(weights, direct.fields, ref.fields, times):
        if wt == 0.0:
            continue
        lhs += wt * float((fd.values * psi1(t, *xmesh) * psi2_eps).sum()) * cell_d
        p1 = psi1(t, *rxmesh)[(...,) + (None,) * nyr]
        rhs += wt * float((fr.values * p1 * psi2_ref).sum()) * cell_r
    return abs(lhs - rhs)


def exponential_cutoff(grid: Grid) -> np.ndarray:
    """Weight e^{-|x - center|} for |x - center| >= 1, smooth C1 inside."""
    nx = len(grid.x_cells)
    r2 = np.zeros(grid.x_cells)
    for d in range(nx):
        c = grid.x_centers(d) - grid.x_length[d] / 2
        r2 = r2 + (c ** 2).reshape([-1 if i == d else 1 for i in range(nx)])
    r = np.sqrt(r2)
    return np.where(r >= 1.0, np.exp(-r), np.exp(-(r2 + 1.0) / 2.0))


def contraction_check(traj1: Trajectory, traj2: Trajectory, growth: float,
                      weight: np.ndarray | None = None) -> list[float]:
    """margin(t) = e^{Ct} <|u1(0)-u2(0)|, zeta> - <|u1(t)-u2(t)|, zeta> per time.

    Nonnegative (up to O(dx)) when the weighted contraction inequality holds.
    weight=None uses the unit weight (plain L1 contraction, C = 0 natural).
    """
    g = traj1.fields[0].grid
    cell = float(np.prod(g.dx))
    extra = traj1.fields[0].values.ndim - len(g.x_cells)
    if extra:
        cell *= float(np.prod(g.dy))
    w = np.ones(g.x_cells) if weight is None else weight
    if extra:
        w = w[(...,) + (None,) * extra]
    d0 = float((np.abs(traj1.fields[0].values - traj2.fields[0].values) * w).sum()) * cell
    margins = []
    for f1, f2, t in zip(traj1.fields, traj2.fields, traj1.times):
        dt_ = float((np.abs(f1.values - f2.values) * w).sum()) * cell
        margins.append(np.exp(growth * t) * d0 - dt_)
    return margins


@dataclass
class ConvergenceReport:
    eps_values: list
    delta_values: list
    matrix: np.ndarray            # D[i, j] = D(eps_i, delta_j)
    u0_l1_window: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        for i, e in enumerate(self.eps_values):
            for j, d in enumerate(self.delta_values):
                yield {"eps": e, "delta": d, "D": float(self.matrix[i, j]),
                       "u0_l1_window": self.u0_l1_window, **self.meta}
