"""Stationary states of the microscopic problem div_y A(y, v(y)) = 0.

Closed-form families, pseudo-time relaxation to a stationary state, and
construction of well-prepared initial data with barrier pairs.

Residual conventions (each used where its tolerance is meaningful):
  weak      pairing of A(y, v) against analytic gradients of smooth periodic
            test functions, trapezoid quadrature (spectrally accurate for the
            closed-form families; default tolerance 1e-8);
  strong    L1 norm of the forward-difference divergence of A(y, v), first
            order in the grid spacing;
  march     L1 norm of the pseudo-time increment per unit time, the quantity
            driven to zero by relax_to_cell (tolerance 1e-4 by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fluxes import FluxModel
from .fv import SolverConfig, _Stepper, _freeze_axis_flux, _interface_coords
from .grids import Grid, MacroField, indicator_profile


@dataclass
class CellSolution:
    v: np.ndarray                    # values on the cell grid (shape y_cells)
    grid: Grid
    family: str
    residual_weak: float
    residual_strong: float
    kinetic_negativity: float        # worst negativity of the defect antiderivative
    mean: float
    march_residuals: list = field(default_factory=list)
    converged: bool = True
    params: dict = field(default_factory=dict)


@dataclass
class BarrierPair:
    lo: CellSolution
    hi: CellSolution
    lo_fn: Callable
    hi_fn: Callable

    def __post_init__(self):
        if np.any(self.lo.v > self.hi.v + 1e-14):
            raise ValueError("barrier pair must satisfy u1 <= u2 pointwise")


def _y_mesh(grid: Grid):
    axes = [grid.y_centers(d) for d in range(len(grid.y_cells))]
    return tuple(np.meshgrid(*axes, indexing="ij")) if axes else ()


def _forward_div(fields: Sequence[np.ndarray], grid: Grid, first_axis: int | None = None) -> np.ndarray:
    """Forward-difference divergence over the cell axes (trailing by default)."""
    ny = len(grid.y_cells)
    out = np.zeros(np.broadcast(*fields).shape)
    base = out.ndim - ny if first_axis is None else first_axis % out.ndim
    for d in range(ny):
        axis = base + d
        out = out + (np.roll(fields[d], -1, axis=axis) - fields[d]) * grid.y_cells[d]
    return out


def strong_residual(model: FluxModel, v: np.ndarray, grid: Grid) -> float:
    """L1 norm (cell average) of the discrete divergence of A(y, v(y))."""
    y = _y_mesh(grid)
    comps = [model.A[i](y, v) for i in range(model.dim)]
    div = _forward_div(comps, grid)
    return float(np.mean(np.abs(div)))


def random_test_functions(grid: Grid, count: int, seed: int = 7, max_mode: int = 3):
    """Smooth periodic test functions with analytic gradients (Fourier combos)."""
    rng = np.random.default_rng(seed)
    ny = len(grid.y_cells)
    y = _y_mesh(grid)
    tests = []
    for _ in range(count):
        modes = rng.integers(-max_mode, max_mode + 1, size=(3, ny))
        amps = rng.normal(size=3)
        phases = rng.uniform(0, 2 * np.pi, size=3)
        psi = np.zeros(grid.y_cells)
        grad = [np.zeros(grid.y_cells) for _ in range(ny)]
        for m, amp, ph in zip(modes, amps, phases):
            arg = ph + 2 * np.pi * sum(m[d] * y[d] for d in range(ny))
            psi = psi + amp * np.sin(arg)
            for d in range(ny):
                grad[d] = grad[d] + amp * 2 * np.pi * m[d] * np.cos(arg)
        tests.append((psi, grad))
    return tests


def weak_residual(model: FluxModel, v: np.ndarray, grid: Grid,
                  count: int = 100, seed: int = 7) -> float:
    """max over test functions of |<A(., v), grad psi>| / ||psi||_L2."""
    y = _y_mesh(grid)
    comps = [model.A[i](y, v) for i in range(model.dim)]
    measure = float(np.prod(grid.dy))
    worst = 0.0
    for psi, grad in random_test_functions(grid, count, seed):
        pairing = sum(float((c * gdir).sum()) for c, gdir in zip(comps, grad)) * measure
        norm = float(np.sqrt((psi ** 2).sum() * measure))
        if norm > 1e-14:
            worst = max(worst, abs(pairing) / norm)
    return worst


def kinetic_negativity(model: FluxModel, v: np.ndarray, grid: Grid) -> float:
    """Worst negativity of the xi-antiderivative of the stationary kinetic defect.

    The sublevel profile of a stationary entropy solution satisfies
    div_{y,xi}(a 1_{xi<v}) = d_xi m with m >= 0; discretely we accumulate the
    divergence over xi and report the xi-integrated negative mass of the
    accumulation, worst over cell points.  (m is a measure; its discrete
    density is band-spread around the profile level, so negativity is
    meaningful as mass, not pointwise.)
    """
    f = indicator_profile(v, grid)  # shape y_cells + (xi,)
    y = _y_mesh(grid)
    xi = grid.xi_centers()
    yb = tuple(c[..., None] for c in y)
    div = _forward_div([model.a[i](yb, xi) * f for i in range(model.dim)], grid,
                       first_axis=f.ndim - len(grid.y_cells) - 1)
    # antiderivative of div_y(a f) + d_xi(a_{N+1} f), exact in xi: the transport
    # part telescopes, with f = 1 below the window (indicator convention)
    transport = model.a[model.dim](yb, xi) * f
    bottom = model.a[model.dim](yb, xi[:1]) * 1.0
    m = np.cumsum(div, axis=-1) * grid.dxi + transport - bottom
    neg_mass = np.clip(-m, 0.0, None).sum(axis=-1) * grid.dxi
    return float(neg_mass.max())


def _solution(model: FluxModel, v: np.ndarray, grid: Grid, family: str,
              params=None, march=None, converged=True) -> CellSolution:
    return CellSolution(
        v=v,
        grid=grid,
        family=family,
        residual_weak=weak_residual(model, v, grid),
        residual_strong=strong_residual(model, v, grid),
        kinetic_negativity=kinetic_negativity(model, v, grid) if grid.xi_cells else 0.0,
        mean=float(v.mean()),
        march_residuals=march or [],
        converged=converged,
        params=dict(params or {}),
    )


# ---------------------------------------------------------------------------
# closed-form families
# ---------------------------------------------------------------------------

def stationary_family(model: FluxModel, family: str, grid: Grid, **params) -> CellSolution:
    """Closed-form stationary entropy solutions.

    constant            v = c, any divergence-free flux
    hamiltonian         v = G(phi(y)) - <G(phi)>, flux a0 = (-d2 phi, d1 phi)
    hetero_1d_branch    v = sqrt(2 (q - b(y))), q > max b (N = 1)
    """
    if family == "constant":
        if not model.divergence_free:
            raise ValueError("constant states are stationary for divergence-free fluxes only")
        c = float(params.get("c", 0.0))
        return _solution(model, c + np.zeros(grid.y_cells), grid, family, {"c": c})

    if family == "hamiltonian":
        phi = model.params.get("phi")
        if phi is None:
            raise ValueError("hamiltonian family needs a flux with a stream function")
        G = params.get("G", lambda s: s)
        offset = float(params.get("offset", 0.0))
        y = _y_mesh(grid)
        raw = G(phi(*y))
        v = raw - raw.mean() + offset
        return _solution(model, v, grid, family, {"offset": offset})

    if family == "hetero_1d_branch":
        if model.name != "hetero_1d":
            raise ValueError("branch family is specific to the hetero_1d catalog flux")
        b = model.params["b"]
        q = float(params["q"])
        y = _y_mesh(grid)
        bv = b(y[0])
        if q <= float(bv.max()):
            raise ValueError(f"need q > max b = {bv.max():.6g}")
        v = np.sqrt(2.0 * (q - bv))
        return _solution(model, v, grid, family, {"q": q})

    raise ValueError(f"unknown stationary family {family!r}")


# ---------------------------------------------------------------------------
# pseudo-time relaxation
# ---------------------------------------------------------------------------

def _cell_as_macro_grid(grid: Grid, state_bound: float) -> Grid:
    return Grid(x_cells=grid.y_cells, x_length=(1.0,) * len(grid.y_cells),
                y_cells=(), xi_cells=0, xi_max=0.0,
                support_bound=state_bound, epsilon=1.0)


def relax_to_cell(model: FluxModel, v_init: np.ndarray, grid: Grid,
                  pseudo_t: float = 20.0, cfl: float = 0.45,
                  tol: float = 1e-4, window: int = 100,
                  plateau_tol: float = 1e-10) -> CellSolution:
    """March d_tau v + div_y A(y, v) = 0 until the increment rate stalls.

    Returns the long-time state; converged is False when the increment rate
    plateaus (relative change over `window` steps below plateau_tol) while
    still above tol.
    """
    state_bound = float(np.max(np.abs(v_init))) + 1.0
    mgrid = _cell_as_macro_grid(grid, state_bound)
    cfg = SolverConfig(cfl=cfl, t_end=pseudo_t, entropy_ks=())
    fluxes = [_freeze_axis_flux(model, ax, _interface_coords(mgrid, ax, 1.0, mgrid.x_cells),
                                state_bound, cfg.scheme)
              for ax in range(len(mgrid.x_cells))]
    stepper = _Stepper(fluxes, mgrid, cfg)
    dt = stepper.dt_max
    v = np.asarray(v_init, dtype=float).copy()
    residuals = []
    measure = float(np.prod(mgrid.dx))
    steps = max(1, int(np.ceil(pseudo_t / dt)))
    converged = False
    for n in range(steps):
        v_new = stepper.step(v, dt)
        res = float(np.abs(v_new - v).sum()) * measure / dt
        residuals.append(res)
        v = v_new
        if res <= tol * 1e-4:
            converged = True
            break
        if len(residuals) > window:
            recent, past = residuals[-1], residuals[-window]
            if abs(past - recent) < plateau_tol:
                converged = recent <= tol
                break
    else:
        converged = residuals[-1] <= tol
    if residuals and residuals[-1] <= tol:
        converged = True
    sol = _solution(model, v, grid, "relaxed", {"pseudo_t": pseudo_t},
                    march=residuals, converged=converged)
    return sol


# ---------------------------------------------------------------------------
# well-prepared initial data
# ---------------------------------------------------------------------------

@dataclass
class PreparedData:
    u0: MacroField                  # shape x_cells + y_cells
    u0_fn: Callable                 # u0_fn(x_coords..., y_coords...), vectorized
    barriers: BarrierPair
    prep_residual: float            # worst-over-x strong cell residual of u0


def _certified_range_1d(fn, n: int = 8192):
    """Lower/upper bounds of a smooth periodic profile over the continuum.

    Dense sampling plus a Lipschitz margin estimated from the samples, so the
    returned interval certifiably contains the range (barriers built from it
    bound every finer sampling of the same profile).
    """
    t = (np.arange(n) + 0.5) / n
    v = np.asarray(fn(t), dtype=float) + np.zeros(n)
    lip = float(np.max(np.abs(np.diff(v, append=v[:1])))) * n
    margin = 0.75 * lip / n
    return float(v.min()) - margin, float(v.max()) + margin


def _certified_range_nd(fn, dims: int, lengths, n: int = 512):
    axes = [(np.arange(n) + 0.5) / n * lengths[d] for d in range(dims)]
    mesh = np.meshgrid(*axes, indexing="ij")
    v = np.asarray(fn(*mesh), dtype=float) + np.zeros((n,) * dims)
    lip = 0.0
    for d in range(dims):
        lip = max(lip, float(np.max(np.abs(np.diff(v, axis=d)))) * n / lengths[d])
    margin = 0.75 * lip * max(lengths) / n
    return float(v.min()) - margin, float(v.max()) + margin


def prepare_initial_data(model: FluxModel, grid: Grid, x_profile: Callable,
                         cell_family: str, **params) -> PreparedData:
    """Cell-solution families modulated by a macroscopic profile.

    constant         u0(x, y) = p(x)                    (divergence-free fluxes)
    shear            u0(x, y) = p(x) s(y2)              (shear-structured fluxes)
    hamiltonian      u0(x, y) = p(x) + G(phi(y)) - <G>  (rot-phi fluxes)
    hetero_1d_branch u0(x, y) = sqrt(2 (p(x) - b(y))),  range(p) above max b
    The barrier pair uses the family at the extreme profile values.
    """
    xs = [grid.x_centers(d) for d in range(len(grid.x_cells))]
    xmesh = tuple(np.meshgrid(*xs, indexing="ij"))
    ymesh = _y_mesh(grid)
    p = np.asarray(x_profile(*xmesh), dtype=float) + np.zeros(grid.x_cells)
    p_lo, p_hi = float(p.min()), float(p.max())
    nx, ny = len(grid.x_cells), len(grid.y_cells)
    xb = tuple(c[(...,) + (None,) * ny] for c in xmesh)
    yb = tuple(c[(None,) * nx + (...,)] for c in ymesh)

    if cell_family == "constant":
        if not model.divergence_free:
            raise ValueError("constant preparation needs a divergence-free flux")
        u0_fn = lambda *coords: x_profile(*coords[:nx]) + 0.0 * sum(coords[nx:])
        u0 = p[(...,) + (None,) * ny] + np.zeros(grid.x_cells + grid.y_cells)
        p_lo, p_hi = _certified_range_nd(x_profile, nx, grid.x_length)
        lo = stationary_family(model, "constant", grid, c=p_lo)
        hi = stationary_family(model, "constant", grid, c=p_hi)
        barriers = BarrierPair(lo, hi, lambda *y: p_lo + 0.0 * y[0], lambda *y: p_hi + 0.0 * y[0])

    elif cell_family == "shear":
        s = params.get("s", lambda y2: np.ones_like(y2))
        if np.min(s(grid.y_centers(ny - 1))) < 0:
            raise ValueError("shear modulation must keep a signed profile for barriers")
        u0_fn = lambda *coords: x_profile(*coords[:nx]) * s(coords[-1])
        u0 = u0_fn(*xb, *yb) + np.zeros(grid.x_cells + grid.y_cells)
        # certified continuum bounds: the composed data samples the modulation
        # more finely than this grid, so grid extrema are not barriers
        w_lo, w_hi = _certified_range_nd(x_profile, nx, grid.x_length)
        s_lo, s_hi = _certified_range_1d(s)
        prods = [w_lo * s_lo, w_lo * s_hi, w_hi * s_lo, w_hi * s_hi]
        lo_v, hi_v = min(prods), max(prods)
        lo = stationary_family(model, "constant", grid, c=lo_v)
        hi = stationary_family(model, "constant", grid, c=hi_v)
        barriers = BarrierPair(lo, hi, lambda *y: lo_v + 0.0 * y[0], lambda *y: hi_v + 0.0 * y[0])

    elif cell_family == "hamiltonian":
        phi = model.params.get("phi")
        if phi is None:
            raise ValueError("hamiltonian preparation needs a stream function")
        G = params.get("G", lambda s_: s_)
        raw = G(phi(*ymesh))
        shift = float(raw.mean())
        u0_fn = lambda *coords: x_profile(*coords[:nx]) + G(phi(*coords[nx:])) - shift
        u0 = p[(...,) + (None,) * ny] + (raw - shift)[(None,) * nx + (...,)]
        p_lo, p_hi = _certified_range_nd(x_profile, nx, grid.x_length)
        lo = stationary_family(model, "hamiltonian", grid, G=G, offset=p_lo)
        hi = stationary_family(model, "hamiltonian", grid, G=G, offset=p_hi)
        barriers = BarrierPair(lo, hi,
                               lambda *y: p_lo + G(phi(*y)) - shift,
                               lambda *y: p_hi + G(phi(*y)) - shift)

    elif cell_family == "hetero_1d_branch":
        b = model.params["b"]
        _, bmax = _certified_range_1d(b)
        p_lo, p_hi = _certified_range_nd(x_profile, nx, grid.x_length)
        if p_lo <= bmax:
            raise ValueError(f"profile range must stay above max b = {bmax:.6g}")
        u0_fn = lambda *coords: np.sqrt(2.0 * (x_profile(*coords[:nx]) - b(coords[-1])))
        u0 = np.sqrt(2.0 * (p[(...,) + (None,) * ny] - b(yb[0])))
        lo = stationary_family(model, "hetero_1d_branch", grid, q=p_lo)
        hi = stationary_family(model, "hetero_1d_branch", grid, q=p_hi)
        barriers = BarrierPair(lo, hi,
                               lambda *y: np.sqrt(2.0 * (p_lo - b(y[0]))),
                               lambda *y: np.sqrt(2.0 * (p_hi - b(y[0]))))

    else:
        raise ValueError(f"unknown preparation family {cell_family!r}")

    comps = [model.A[i](yb, u0) for i in range(model.dim)]
    div = _forward_div(comps, grid)
    prep_residual = float(np.max(np.mean(np.abs(div), axis=tuple(range(nx, nx + ny)))
                                 if ny else np.abs(div)))
    return PreparedData(MacroField(u0, grid), u0_fn, barriers, prep_residual)


def compose_initial(prep: PreparedData, grid: Grid) -> MacroField:
    """Sample u0(x, x/eps) at the macroscopic cell centers."""
    if grid.epsilon is None:
        raise ValueError("composition needs grid.epsilon")
    nx = len(grid.x_cells)
    xs = [grid.x_centers(d) for d in range(nx)]
    xmesh = np.meshgrid(*xs, indexing="ij")
    ymesh = [np.mod(c / grid.epsilon, 1.0) for c in xmesh]
    return MacroField(prep.u0_fn(*xmesh, *ymesh) + np.zeros(grid.x_cells), grid)


def save_cell_solution(path, sol: CellSolution) -> None:
    """Write the state values in the field binary format (grid pinned)."""
    from .fieldio import write_field
    write_field(path, MacroField(sol.v, sol.grid))


def load_cell_solution(path, model: FluxModel, family: str = "imported") -> CellSolution:
    """Read a state written by save_cell_solution and recompute its residuals."""
    from .fieldio import read_field
    f = read_field(path)
    return _solution(model, f.values, f.grid, family)
