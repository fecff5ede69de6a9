"""Orthogonal projections onto the constraint spaces of the limit dynamics.

Three objects cooperate here:

  ConstraintSpace   the space of cell fields annihilated by the microscopic
                    transport operator div_y(a0 .), realized as exact row
                    averaging (shear structure), as a least-squares projection
                    onto the kernel of the forward-difference operator, or as
                    the fixed point of a characteristic-flow time average;
  ChiCone           the polyhedron of admissible kinetic profiles: zero outside
                    the support window, nonincreasing in xi except for a unit
                    jump budget at xi = 0;
  project_intersection
                    Dykstra's alternating scheme between the two, converging
                    to the projection onto their intersection.

All projections use the unweighted cell-average inner product, batched over
leading axes.  Field layout: (..., y1, ..., yN[, xi]).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.sparse.linalg import LinearOperator, lsqr

from .fluxes import FluxModel
from .grids import Grid


# ---------------------------------------------------------------------------
# pool-adjacent-violators with a feasibility fast path
# ---------------------------------------------------------------------------

def pav_nonincreasing(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto nonincreasing sequences along the last axis."""
    y = np.asarray(y, dtype=float)
    flat = y.reshape(-1, y.shape[-1])
    out = flat.copy()
    bad = np.nonzero((np.diff(flat, axis=-1) > 0).any(axis=-1))[0]
    for i in bad:
        out[i] = isotonic_regression(flat[i], increasing=False).x
    return out.reshape(y.shape)


# ---------------------------------------------------------------------------
# the profile cone
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiCone:
    """Discrete admissible-profile cone on the kinetic grid.

    Cells outside [k_lo, k_hi] are pinned to zero; differences across cell
    interfaces are bounded by the jump budget (1 across xi = 0, else 0).
    """

    grid: Grid
    k_lo: int
    k_hi: int

    @property
    def zero_interface(self) -> int:
        return self.grid.zero_interface

    def jump_offset(self) -> np.ndarray:
        """Cumulative jump budget per cell: 1 right of the zero interface."""
        off = np.zeros(self.grid.xi_cells)
        off[self.zero_interface:] = 1.0
        return off

    def membership_gap(self, phi: np.ndarray) -> float:
        """Worst constraint violation (0 for members)."""
        off = self.jump_offset()
        p = phi - off
        gap = 0.0
        if self.k_lo > 0:
            gap = max(gap, float(np.max(np.abs(p[..., :self.k_lo]))))
        if self.k_hi < self.grid.xi_cells - 1:
            gap = max(gap, float(np.max(np.abs(p[..., self.k_hi + 1:] + 1.0))))
        d = np.diff(p, axis=-1)
        gap = max(gap, float(np.max(d, initial=0.0)))
        return gap


def make_chi_cone(grid: Grid, support_bound: float | None = None) -> ChiCone:
    """Cone whose support window is the cell-aligned hull of [-M, M]."""
    M = grid.support_bound if support_bound is None else support_bound
    half_cells = int(np.ceil(M / grid.dxi - 1e-12))
    half_cells = min(half_cells, grid.xi_cells // 2)
    zi = grid.zero_interface
    return ChiCone(grid, zi - half_cells, zi + half_cells - 1)


def project_chi_cone(phi: np.ndarray, cone: ChiCone) -> np.ndarray:
    """Exact Euclidean projection onto the cone, batched over leading axes.

    After subtracting the cumulative jump budget the constraints read: pinned
    to 0 left of the window, to -1 right of it, nonincreasing in between.  The
    interior solution is the nonincreasing regression clipped to [-1, 0]
    (bounded isotonic regression equals the truncated unrestricted one); the
    pins are assigned exactly.  Already-feasible profiles pass through
    untouched, which keeps the hot relaxation path cheap.
    """
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("cone projection needs finite values")
    off = cone.jump_offset()
    p = phi - off
    lo, hi = cone.k_lo, cone.k_hi
    n = cone.grid.xi_cells

    out = p.copy()
    interior = pav_nonincreasing(p[..., lo:hi + 1])
    if lo > 0:
        interior = np.minimum(interior, 0.0)
        out[..., :lo] = 0.0
    if hi < n - 1:
        interior = np.maximum(interior, -1.0)
        out[..., hi + 1:] = -1.0
    out[..., lo:hi + 1] = interior
    return out + off


# ---------------------------------------------------------------------------
# characteristic flow on the torus
# ---------------------------------------------------------------------------

@dataclass
class CharacteristicFlow:
    """RK4 flow of dX/dt = a0(X) v on the periodic cell, batched start points.

    v is a per-trajectory scalar speed factor (the profile derivative at the
    kinetic slice being projected; 1 for plain coefficient fields).  Horizons
    are measured in grid-cell crossing times of the fastest trajectory.
    """

    model: FluxModel
    grid: Grid
    steps_per_crossing: int = 6

    def _velocity(self, pos, speed_factor):
        y = tuple(pos[..., d] for d in range(pos.shape[-1]))
        sep = self.model.separate
        return np.stack([sep.a0[d](*y) * speed_factor for d in range(len(y))], axis=-1)

    def _scales(self, speed_factor):
        ny = len(self.grid.y_cells)
        ymesh = np.meshgrid(*[self.grid.y_centers(d) for d in range(ny)], indexing="ij")
        sup = max(abs(speed_factor), 1e-30) * max(
            float(np.max(np.abs(self.model.separate.a0[d](*ymesh)))) for d in range(ny))
        crossing = min(self.grid.dy) / sup if sup > 1e-14 else np.inf
        return sup, crossing

    def time_average(self, f: np.ndarray, horizon: float, speed_factor: float = 1.0):
        """Trapezoid average of the bilinear interpolant of f along the flow.

        horizon counts cell-crossing times at the fastest speed.
        """
        ny = len(self.grid.y_cells)
        start = np.stack(np.meshgrid(*[self.grid.y_centers(d) for d in range(ny)],
                                     indexing="ij"), axis=-1)
        sup, crossing = self._scales(speed_factor)
        if not np.isfinite(crossing):
            return f.copy()
        horizon_time = horizon * crossing
        dt = crossing / self.steps_per_crossing
        nsteps = max(2, int(np.ceil(horizon_time / dt)))
        dt = horizon_time / nsteps
        pos = start.copy()
        acc = _interp_periodic(f, pos, self.grid) * 0.5
        for _ in range(nsteps - 1):
            pos = self._rk4(pos, dt, speed_factor)
            acc += _interp_periodic(f, pos, self.grid)
        pos = self._rk4(pos, dt, speed_factor)
        acc += _interp_periodic(f, pos, self.grid) * 0.5
        return acc / nsteps

    def _rk4(self, pos, dt, speed_factor):
        k1 = self._velocity(pos, speed_factor)
        k2 = self._velocity(pos + 0.5 * dt * k1, speed_factor)
        k3 = self._velocity(pos + 0.5 * dt * k2, speed_factor)
        k4 = self._velocity(pos + dt * k3, speed_factor)
        return np.mod(pos + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 1.0)

    def volume_error(self, horizon: float, speed_factor: float = 1.0,
                     fd_step: float = 1e-5) -> float:
        """|det of the flow Jacobian - 1|, worst start point, via the tangent map."""
        ny = len(self.grid.y_cells)
        start = np.stack(np.meshgrid(*[self.grid.y_centers(d) for d in range(ny)],
                                     indexing="ij"), axis=-1)
        sup, crossing = self._scales(speed_factor)
        if not np.isfinite(crossing):
            return 0.0
        horizon_time = horizon * crossing
        dt = crossing / self.steps_per_crossing
        nsteps = max(2, int(np.ceil(horizon_time / dt)))
        dt = horizon_time / nsteps
        pos = start.copy()
        jac = np.broadcast_to(np.eye(ny), start.shape[:-1] + (ny, ny)).copy()

        def grad_v(p):
            g = np.empty(p.shape[:-1] + (ny, ny))
            for j in range(ny):
                up = p.copy(); up[..., j] += fd_step
                dn = p.copy(); dn[..., j] -= fd_step
                g[..., j] = (self._velocity(up, speed_factor)
                             - self._velocity(dn, speed_factor)) / (2 * fd_step)
            return g

        for _ in range(nsteps):
            k1 = np.einsum("...ij,...jk->...ik", grad_v(pos), jac)
            p2 = self._rk4(pos, 0.5 * dt, speed_factor)
            k2 = np.einsum("...ij,...jk->...ik", grad_v(p2), jac + 0.5 * dt * k1)
            k3 = np.einsum("...ij,...jk->...ik", grad_v(p2), jac + 0.5 * dt * k2)
            pos = self._rk4(pos, dt, speed_factor)
            k4 = np.einsum("...ij,...jk->...ik", grad_v(pos), jac + dt * k3)
            jac = jac + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        det = np.linalg.det(jac)
        return float(np.max(np.abs(det - 1.0)))


def _interp_periodic(f: np.ndarray, pos: np.ndarray, grid: Grid) -> np.ndarray:
    """Bilinear periodic interpolation of a cell field at fractional positions."""
    ny = len(grid.y_cells)
    out = None
    idx_w = []
    for d in range(ny):
        n = grid.y_cells[d]
        s = pos[..., d] * n - 0.5
        i0 = np.floor(s).astype(np.int64)
        w = s - i0
        idx_w.append((np.mod(i0, n), np.mod(i0 + 1, n), w))
    if ny == 1:
        i0, i1, w = idx_w[0]
        return f[i0] * (1 - w) + f[i1] * w
    (i0, i1, wx), (j0, j1, wy) = idx_w
    return (f[i0, j0] * (1 - wx) * (1 - wy) + f[i1, j0] * wx * (1 - wy)
            + f[i0, j1] * (1 - wx) * wy + f[i1, j1] * wx * wy)


# ---------------------------------------------------------------------------
# constraint space
# ---------------------------------------------------------------------------

@dataclass
class ConstraintSpace:
    """Projection onto {f : div_y(a0 f) = 0} for a separate divergence-free flux.

    kind 'rows'      exact y1-averaging per (y2,) row (shear structure); rows
                     where the speed vanishes identically are fixed points;
    kind 'nullspace' least-squares projection onto the kernel of the discrete
                     forward-difference operator, solver tolerance ~1e-12;
    kind 'ergodic'   finite-horizon characteristic time average iterated to its
                     fixed point (stationarity tolerance 1e-12).
    """

    kind: str
    model: FluxModel
    grid: Grid
    horizon: float = 200.0
    fixed_point_tol: float = 1e-12
    lsqr_tol: float = 1e-13
    max_sweeps: int = 200
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model.separate is None or not self.model.divergence_free:
            raise ValueError("constraint spaces need a separate divergence-free flux")
        ny = len(self.grid.y_cells)
        ymesh = np.meshgrid(*[self.grid.y_centers(d) for d in range(ny)], indexing="ij")
        self._a0 = [self.model.separate.a0[d](*ymesh) + np.zeros(self.grid.y_cells)
                    for d in range(ny)]
        if self.kind == "rows":
            a01, a02 = self._a0
            y1_variation = float(np.max(np.abs(np.diff(a01, axis=0)))) if a01.shape[0] > 1 else 0.0
            if float(np.max(np.abs(a02))) > 1e-14 or y1_variation > 1e-14:
                raise ValueError("rows realization needs shear structure a0 = (a1(y2), 0)")
            self._live_rows = np.abs(a01[0]) > 1e-14  # per y2
        elif self.kind not in ("nullspace", "ergodic"):
            raise ValueError(f"unknown realization {self.kind!r}")
        if self.kind == "ergodic":
            self._flow = CharacteristicFlow(self.model, self.grid)

    # -- the discrete operator of the nullspace realization --------------------
    def _apply_div(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(v.shape, dtype=float)
        for d, a in enumerate(self._a0):
            g = a * v
            out += (np.roll(g, -1, axis=d) - g) * self.grid.y_cells[d]
        return out

    def _apply_div_t(self, w: np.ndarray) -> np.ndarray:
        out = np.zeros(w.shape, dtype=float)
        for d, a in enumerate(self._a0):
            out += a * (np.roll(w, 1, axis=d) - w) * self.grid.y_cells[d]
        return out

    def project_slice(self, f: np.ndarray, speed_factor: float = 1.0) -> np.ndarray:
        """Project one cell field (shape y_cells)."""
        if self.kind == "rows":
            mean = f.mean(axis=0, keepdims=True)
            return np.where(self._live_rows, mean, f)
        if self.kind == "nullspace":
            shape = f.shape
            op = LinearOperator(
                (f.size, f.size),
                matvec=lambda z: self._apply_div_t(z.reshape(shape)).ravel(),
                rmatvec=lambda z: self._apply_div(z.reshape(shape)).ravel(),
            )
            sol = lsqr(op, f.ravel(), atol=self.lsqr_tol, btol=self.lsqr_tol,
                       iter_lim=20000)
            return f - self._apply_div_t(sol[0].reshape(shape))
        # ergodic: iterate the flow average to stationarity
        g = f.copy()
        for sweep in range(self.max_sweeps):
            g_new = self._flow.time_average(g, self.horizon, speed_factor)
            delta = float(np.max(np.abs(g_new - g)))
            g = g_new
            if delta <= self.fixed_point_tol:
                break
        self.diagnostics["ergodic_sweeps"] = sweep + 1
        self.diagnostics["ergodic_delta"] = delta
        return g

    def project(self, f: np.ndarray, xi_resolved: bool = False) -> np.ndarray:
        """Project a field (..., y..., [xi]), slice-wise over batch and xi.

        For xi-resolved fields of a separate flux the kernel is xi-independent
        (the profile derivative only rescales orbit speed), so the same cell
        projection applies per kinetic slice.
        """
        ny = len(self.grid.y_cells)
        if self.kind == "rows":
            axis = f.ndim - ny - (1 if xi_resolved else 0)
            mean = f.mean(axis=axis, keepdims=True)
            live = self._live_rows.reshape(
                (1,) * axis + (1, -1) + ((1,) if xi_resolved else ()))
            return np.where(live, mean, f)
        tail = f.shape[f.ndim - ny - (1 if xi_resolved else 0):]
        lead = f.shape[:f.ndim - len(tail)]
        flat = f.reshape((-1,) + tail)
        out = np.empty_like(flat)
        if xi_resolved:
            gp = self.model.separate.g_prime(self.grid.xi_centers())
            for b in range(flat.shape[0]):
                for k in range(self.grid.xi_cells):
                    out[b, ..., k] = self.project_slice(flat[b, ..., k], float(gp[k]))
        else:
            for b in range(flat.shape[0]):
                out[b] = self.project_slice(flat[b])
        return out.reshape(f.shape)

    def horizon_check(self, f: np.ndarray) -> float:
        """Gap between horizons T and 2T of the raw flow average (ergodic only)."""
        if self.kind != "ergodic":
            return 0.0
        a = self._flow.time_average(f, self.horizon)
        b = self._flow.time_average(f, 2.0 * self.horizon)
        return float(np.max(np.abs(a - b)))

    def residual(self, f: np.ndarray, xi_resolved: bool = False) -> float:
        """L1 cell norm of div_y(a0 f), worst slice (membership diagnostic)."""
        ny = len(self.grid.y_cells)
        tail = ny + (1 if xi_resolved else 0)
        flat = f.reshape((-1,) + f.shape[f.ndim - tail:])
        worst = 0.0
        for b in range(flat.shape[0]):
            sl = flat[b]
            if xi_resolved:
                for k in range(self.grid.xi_cells):
                    worst = max(worst, float(np.mean(np.abs(self._apply_div(sl[..., k])))))
            else:
                worst = max(worst, float(np.mean(np.abs(self._apply_div(sl)))))
        return worst


def project_vector_field(model: FluxModel, space: ConstraintSpace) -> list[np.ndarray]:
    """Componentwise projection of the advection coefficients: a0 -> P(a0)."""
    return [space.project_slice(a.copy()) for a in space._a0]


# ---------------------------------------------------------------------------
# Dykstra intersection
# ---------------------------------------------------------------------------

@dataclass
class DykstraResult:
    value: np.ndarray
    iterations: int
    gap: float
    converged: bool


def project_intersection(f: np.ndarray, space: ConstraintSpace | None, cone: ChiCone,
                         tol: float = 1e-10, max_iter: int = 500,
                         xi_resolved: bool = True) -> DykstraResult:
    """Dykstra's alternating projections onto (constraint space) & (cone).

    space=None means the constraint projection is the identity (e.g. shear
    fields stored without their irrelevant cell direction), in which case the
    cone projection alone is exact and returns after one cycle.
    """
    x = np.asarray(f, dtype=float)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    prev = x
    for it in range(1, max_iter + 1):
        y = space.project(x + p, xi_resolved=xi_resolved) if space is not None else (x + p)
        p = x + p - y
        x_new = project_chi_cone(y + q, cone)
        q = y + q - x_new
        gap = float(np.max(np.abs(x_new - prev)))
        prev = x_new
        x = x_new
        if gap <= tol:
            return DykstraResult(x_new, it, gap, True)
    return DykstraResult(x_new, max_iter, gap, False)
