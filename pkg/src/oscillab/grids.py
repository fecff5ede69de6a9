"""Product grids over macroscopic space, the periodic cell, and the kinetic variable.

Conventions:
  * the macroscopic box is periodic, cell-centered, spacing dx_i = x_length_i / x_cells_i;
  * the unit cell is the torus (0,1)^N (cell-centered y grid, singleton axes allowed
    for directions a field provably does not depend on);
  * the kinetic grid is uniform and cell-centered on [-xi_max, xi_max] with an even
    number of cells so that xi = 0 is a cell interface.

The signed level profile chi(xi, u) = 1_{0<xi<u} - 1_{u<xi<0} is discretized by exact
cell averages, so its zeroth moment recovers u to round-off even when u is off-grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Geometry shared by all fields of one experiment.

    x_cells / x_length describe the periodic macroscopic box, y_cells the periodic
    cell grid, xi_cells / xi_max the kinetic window [-L, L].  support_bound is the
    sup-norm bound M of the data; the window must satisfy L > M.  epsilon is the
    scale ratio of direct simulations (None for purely macroscopic or per-cell work).
    """

    x_cells: tuple[int, ...] = ()
    x_length: tuple[float, ...] = ()
    y_cells: tuple[int, ...] = ()
    xi_cells: int = 0
    xi_max: float = 0.0
    support_bound: float = 0.0
    epsilon: float | None = None

    def __post_init__(self):
        if len(self.x_length) != len(self.x_cells):
            object.__setattr__(self, "x_length", tuple(1.0 for _ in self.x_cells))
        if self.xi_cells:
            if self.xi_cells % 2:
                raise ValueError("xi_cells must be even so that xi=0 is a cell interface")
            if not self.xi_max > self.support_bound:
                raise ValueError(
                    f"kinetic window must satisfy L > M, got L={self.xi_max}, M={self.support_bound}"
                )

    # -- spacings ------------------------------------------------------------
    @property
    def dx(self) -> tuple[float, ...]:
        return tuple(l / n for l, n in zip(self.x_length, self.x_cells))

    @property
    def dy(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.y_cells)

    @property
    def dxi(self) -> float:
        return 2.0 * self.xi_max / self.xi_cells

    # -- coordinates ----------------------------------------------------------
    def x_centers(self, axis: int) -> np.ndarray:
        n, d = self.x_cells[axis], self.dx[axis]
        return (np.arange(n) + 0.5) * d

    def y_centers(self, axis: int) -> np.ndarray:
        n = self.y_cells[axis]
        return (np.arange(n) + 0.5) / n

    def xi_centers(self) -> np.ndarray:
        return -self.xi_max + (np.arange(self.xi_cells) + 0.5) * self.dxi

    def xi_edges(self) -> np.ndarray:
        return -self.xi_max + np.arange(self.xi_cells + 1) * self.dxi

    @property
    def zero_interface(self) -> int:
        """Index k such that the interface between cells k-1 and k sits at xi = 0."""
        return self.xi_cells // 2

    def resolved(self) -> bool:
        """Direct runs resolve the fast scale when dx <= eps/32 in every direction."""
        if self.epsilon is None or not self.x_cells:
            return True
        return all(d <= self.epsilon / 32.0 + 1e-15 for d in self.dx)


def xi_window_from_bound(support_bound: float, xi_cells: int) -> float:
    """Window half-width L with L = M + 4*dxi, solved for the given cell count."""
    if xi_cells <= 8:
        raise ValueError("need more than 8 kinetic cells to fit the default margin")
    return support_bound / (1.0 - 8.0 / xi_cells)


@dataclass
class MacroField:
    """Scalar field on the x grid (shape x_cells) or the x-by-y grid."""

    values: np.ndarray
    grid: Grid
    time: float = 0.0

    def copy(self) -> "MacroField":
        return MacroField(self.values.copy(), self.grid, self.time)


@dataclass
class KineticField:
    """Kinetic density on (x...,) + (y...,) + (xi,) or (y...,) + (xi,).

    form is "chi" for signed level profiles (values in [-1,1], sgn(xi) f >= 0)
    and "indicator" for sublevel profiles (values in [0,1]).
    """

    values: np.ndarray
    grid: Grid
    time: float = 0.0
    form: str = "chi"

    def copy(self) -> "KineticField":
        return KineticField(self.values.copy(), self.grid, self.time, self.form)


# ---------------------------------------------------------------------------
# exact profile discretization
# ---------------------------------------------------------------------------

def chi_profile(u, grid: Grid) -> np.ndarray:
    """Cell averages of chi(., u) on the kinetic grid.

    Full cells inside (0,u) (or (u,0)) get +-1, the cell containing u its exact
    fraction, so dxi * sum = u to round-off.  u may be a scalar or an array;
    the kinetic axis is appended last.
    """
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > grid.xi_max):
        raise ValueError("level value exceeds the kinetic window")
    edges = grid.xi_edges()
    lo, hi = edges[:-1], edges[1:]
    uu = u[..., None]
    pos = np.clip(np.minimum(hi, np.maximum(uu, 0.0)) - np.maximum(lo, 0.0), 0.0, None)
    neg = np.clip(np.minimum(hi, 0.0) - np.maximum(lo, np.minimum(uu, 0.0)), 0.0, None)
    return (pos - neg) / grid.dxi


def indicator_reference(grid: Grid) -> np.ndarray:
    """Cell averages of 1_{xi<0}: the offset between indicator and chi profiles."""
    edges = grid.xi_edges()
    lo, hi = edges[:-1], edges[1:]
    return np.clip(-lo, 0.0, hi - lo) / grid.dxi


def indicator_profile(u, grid: Grid) -> np.ndarray:
    """Cell averages of 1_{xi<u} = chi(xi,u) + 1_{xi<0}."""
    return chi_profile(u, grid) + indicator_reference(grid)


def moment(values: np.ndarray, grid: Grid, form: str = "chi") -> np.ndarray:
    """Zeroth kinetic moment; inverse of chi_profile on chi-shaped inputs.

    Indicator-form inputs are shifted by the sublevel reference before summing.
    """
    if form == "indicator":
        values = values - indicator_reference(grid)
    return grid.dxi * values.sum(axis=-1)


def kinetic_from_macro(u: MacroField, form: str = "chi") -> KineticField:
    vals = chi_profile(u.values, u.grid)
    if form == "indicator":
        vals = vals + indicator_reference(u.grid)
    return KineticField(vals, u.grid, u.time, form)


def macro_from_kinetic(f: KineticField) -> MacroField:
    return MacroField(moment(f.values, f.grid, f.form), f.grid, f.time)
