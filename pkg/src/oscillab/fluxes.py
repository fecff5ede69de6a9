"""Periodic flux catalog, kinetic coefficients, and structural validation.

A flux is a map A(y, xi) -> R^N on the torus (y) times the state line (xi).
Its kinetic coefficients are a_i = dA_i/dxi (i = 1..N) and a_{N+1} = -div_y A,
which together are divergence free in (y, xi).  Catalog entries supply closed-form
evaluators plus analytic derivative evaluators and the monotone-splitting
primitives used by the Engquist-Osher numerical flux; finite differences are
used only for validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

TWO_PI = 2.0 * np.pi

YArgs = Sequence[np.ndarray]


@dataclass
class SeparateFlux:
    """Structure of fluxes of the form A(y, xi) = a0(y) g(xi) with div_y a0 = 0."""

    a0: tuple[Callable, ...]          # per-component a0_i(*y)
    g: Callable                       # g(xi)
    g_prime: Callable                 # g'(xi)
    g_plus: Callable                  # integral over (0,u) of max(g', 0)
    g_minus: Callable                 # integral over (0,u) of min(g', 0)


@dataclass
class FluxModel:
    """Closed-form periodic flux with analytic kinetic coefficients.

    A[i](y, xi) evaluates the i-th flux component, a[i] the kinetic coefficients
    (the last entry is -div_y A), eo_plus/eo_minus the Engquist-Osher splitting
    primitives: eo_plus[i](y, u) = integral over (0,u) of max(a_i(y,s), 0) ds.
    y is passed as a tuple of coordinate arrays, one per cell dimension.
    """

    name: str
    dim: int
    A: tuple[Callable, ...]
    a: tuple[Callable, ...]
    eo_plus: tuple[Callable, ...]
    eo_minus: tuple[Callable, ...]
    divergence_free: bool
    separate: SeparateFlux | None = None
    params: dict = field(default_factory=dict)

    def numerical_flux(self, axis: int, y: YArgs, u_left, u_right):
        """Engquist-Osher interface flux for the axis-th component, y frozen."""
        return (
            self.A[axis](y, np.zeros(()))
            + self.eo_plus[axis](y, u_left)
            + self.eo_minus[axis](y, u_right)
        )

    def speed_bound(self, state_bound: float, y: YArgs | None = None) -> float:
        """sup over probes of max_i |a_i(y, xi)|, |xi| <= state_bound."""
        xi = np.linspace(-state_bound, state_bound, 257)
        if y is None:
            grids = np.meshgrid(*(np.linspace(0.0, 1.0, 65),) * self.dim, indexing="ij")
            y = tuple(g.ravel()[:, None] for g in grids)
        else:
            y = tuple(np.asarray(c).ravel()[:, None] for c in y)
        best = 0.0
        for i in range(self.dim):
            best = max(best, float(np.max(np.abs(self.a[i](y, xi[None, :])))))
        return best


# ---------------------------------------------------------------------------
# separate-structure helpers
# ---------------------------------------------------------------------------

def _separate_model(name, dim, a0_fns, sep: SeparateFlux, params) -> FluxModel:
    """Assemble a FluxModel from a divergence-free field a0 and a profile g."""

    def make_A(i):
        return lambda y, xi: a0_fns[i](*y) * sep.g(xi)

    def make_a(i):
        return lambda y, xi: a0_fns[i](*y) * sep.g_prime(xi) * np.ones_like(np.asarray(xi, dtype=float))

    def make_plus(i):
        def f(y, u):
            c = a0_fns[i](*y)
            return np.where(c > 0, c * sep.g_plus(u), c * sep.g_minus(u))
        return f

    def make_minus(i):
        def f(y, u):
            c = a0_fns[i](*y)
            return np.where(c > 0, c * sep.g_minus(u), c * sep.g_plus(u))
        return f

    a_full = tuple(make_a(i) for i in range(dim)) + (
        lambda y, xi: np.zeros(np.broadcast(*(np.asarray(c) for c in y), np.asarray(xi)).shape),
    )
    return FluxModel(
        name=name,
        dim=dim,
        A=tuple(make_A(i) for i in range(dim)),
        a=a_full,
        eo_plus=tuple(make_plus(i) for i in range(dim)),
        eo_minus=tuple(make_minus(i) for i in range(dim)),
        divergence_free=True,
        separate=sep,
        params=params,
    )


def _g_identity():
    return (
        lambda xi: np.asarray(xi, dtype=float),
        lambda xi: np.ones_like(np.asarray(xi, dtype=float)),
        lambda u: np.asarray(u, dtype=float),
        lambda u: np.zeros_like(np.asarray(u, dtype=float)),
    )


def _g_burgers():
    return (
        lambda xi: 0.5 * np.asarray(xi, dtype=float) ** 2,
        lambda xi: np.asarray(xi, dtype=float),
        lambda u: 0.5 * np.maximum(u, 0.0) ** 2,
        lambda u: -0.5 * np.minimum(u, 0.0) ** 2,
    )

_G_PROFILES = {"id": _g_identity, "burgers": _g_burgers}


def _shear_a0(base: float, amplitude: float):
    a1 = lambda y2: base + amplitude * np.sin(TWO_PI * y2)
    return (lambda y1, y2: a1(y2) * np.ones_like(np.asarray(y1, dtype=float)),
            lambda y1, y2: np.zeros(np.broadcast(np.asarray(y1), np.asarray(y2)).shape))


def _hamiltonian_a0(amplitude: float):
    # a0 = (-d phi / dy2, d phi / dy1) with phi = amplitude sin(2 pi y1) sin(2 pi y2)
    def a01(y1, y2):
        return -amplitude * TWO_PI * np.sin(TWO_PI * y1) * np.cos(TWO_PI * y2)

    def a02(y1, y2):
        return amplitude * TWO_PI * np.cos(TWO_PI * y1) * np.sin(TWO_PI * y2)

    phi = lambda y1, y2: amplitude * np.sin(TWO_PI * y1) * np.sin(TWO_PI * y2)
    return (a01, a02), phi


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

CATALOG = ("shear", "hamiltonian", "separate_burgers", "hetero_1d", "homogeneous_burgers")


def builtin_flux(name: str, **params) -> FluxModel:
    """Build a validated catalog flux.

    shear                 A = (a1(y2) xi, 0),        a1 = base + amplitude sin(2 pi y2)
    hamiltonian           A = a0(y) g(xi),           a0 = (-d2 phi, d1 phi)
    separate_burgers      A = a0(y) xi^2/2,          a0 shear- or hamiltonian-structured
    hetero_1d             A = b(y) + xi^2/2,         b = amplitude cos(2 pi y), N = 1
    homogeneous_burgers   A = xi^2/2,                N = 1
    """
    if name == "homogeneous_burgers":
        g, gp, gplus, gminus = _g_burgers()
        sep = SeparateFlux((lambda y1: np.ones_like(np.asarray(y1, dtype=float)),), g, gp, gplus, gminus)
        return _separate_model(name, 1, sep.a0, sep, dict(params))

    if name == "shear":
        base = float(params.get("base", 1.0))
        amplitude = float(params.get("amplitude", 0.5))
        a0 = _shear_a0(base, amplitude)
        g, gp, gplus, gminus = _g_identity()
        sep = SeparateFlux(a0, g, gp, gplus, gminus)
        return _separate_model(name, 2, a0, sep, dict(params, base=base, amplitude=amplitude))

    if name == "hamiltonian":
        amplitude = float(params.get("amplitude", 1.0 / TWO_PI))
        profile = str(params.get("g", "id"))
        if profile not in _G_PROFILES:
            raise ValueError(f"unknown g profile {profile!r}")
        a0, phi = _hamiltonian_a0(amplitude)
        g, gp, gplus, gminus = _G_PROFILES[profile]()
        sep = SeparateFlux(a0, g, gp, gplus, gminus)
        model = _separate_model(name, 2, a0, sep, dict(params, amplitude=amplitude, g=profile))
        model.params["phi"] = phi
        return model

    if name == "separate_burgers":
        structure = str(params.get("structure", "shear"))
        if structure == "shear":
            base = float(params.get("base", 1.0))
            amplitude = float(params.get("amplitude", 0.5))
            a0 = _shear_a0(base, amplitude)
        elif structure == "hamiltonian":
            a0, _ = _hamiltonian_a0(float(params.get("amplitude", 1.0 / TWO_PI)))
        else:
            raise ValueError(f"unknown separate_burgers structure {structure!r}")
        g, gp, gplus, gminus = _g_burgers()
        sep = SeparateFlux(a0, g, gp, gplus, gminus)
        return _separate_model(name, 2, a0, sep, dict(params, structure=structure))

    if name == "hetero_1d":
        amplitude = float(params.get("amplitude", 0.5))
        b = lambda y1: amplitude * np.cos(TWO_PI * y1)
        b_prime = lambda y1: -amplitude * TWO_PI * np.sin(TWO_PI * y1)
        xi_arr = lambda xi: np.asarray(xi, dtype=float)
        model = FluxModel(
            name=name,
            dim=1,
            A=(lambda y, xi: b(y[0]) + 0.5 * xi_arr(xi) ** 2,),
            a=(
                lambda y, xi: xi_arr(xi) * np.ones_like(np.asarray(y[0], dtype=float)),
                lambda y, xi: -b_prime(y[0]) * np.ones_like(xi_arr(xi)),
            ),
            eo_plus=(lambda y, u: 0.5 * np.maximum(u, 0.0) ** 2 * np.ones_like(np.asarray(y[0], dtype=float)),),
            eo_minus=(lambda y, u: -0.5 * np.minimum(u, 0.0) ** 2 * np.ones_like(np.asarray(y[0], dtype=float)),),
            divergence_free=False,
            separate=None,
            params=dict(params, amplitude=amplitude),
        )
        model.params["b"] = b
        model.params["b_prime"] = b_prime
        return model

    raise ValueError(f"unknown catalog flux {name!r}; choose from {CATALOG}")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: dict
    h: float
    tol: float
    passed: bool

    def __str__(self):
        rows = "\n".join(f"  {k}: {v:.3e}" for k, v in self.violations.items())
        return f"flux validation (h={self.h:g}, tol={self.tol:g}, passed={self.passed}):\n{rows}"


def _probe_points(model: FluxModel, probes: int, state_bound: float, seed: int = 1234):
    sampler = qmc.Sobol(d=model.dim + 1, scramble=True, seed=seed)
    pts = sampler.random(probes)
    y = tuple(pts[:, i] for i in range(model.dim))
    xi = (2.0 * pts[:, model.dim] - 1.0) * state_bound
    return y, xi


def validate_flux(model: FluxModel, probes: int = 128, h: float = 1e-4,
                  state_bound: float = 1.0, tol_factor: float = 50.0) -> ValidationReport:
    """Max violation of the structural identities over quasi-random probe points.

    Checks, each against centered finite differences of step h:
      periodicity        A(y + e_k, xi) = A(y, xi)
      a_consistency      a_i = dA_i/dxi
      divergence         a_{N+1} = -div_y A
      free_divergence    div_{y,xi} a = 0
      tag_divfree        a_{N+1} = 0 when the flux is tagged divergence free
      tag_separate       A(y, xi) = a0(y) g(xi) when tagged separate
    Violations are data, not errors; passed is True when all are <= tol_factor*h^2.
    """
    if probes < 1 or h <= 0:
        raise ValueError("need probes >= 1 and h > 0")
    y, xi = _probe_points(model, probes, state_bound)
    N = model.dim
    viol: dict[str, float] = {}

    per = 0.0
    for i in range(N):
        for k in range(N):
            shifted = tuple(c + (1.0 if j == k else 0.0) for j, c in enumerate(y))
            per = max(per, float(np.max(np.abs(model.A[i](shifted, xi) - model.A[i](y, xi)))))
    viol["periodicity"] = per

    ac = 0.0
    for i in range(N):
        fd = (model.A[i](y, xi + h) - model.A[i](y, xi - h)) / (2 * h)
        ac = max(ac, float(np.max(np.abs(fd - model.a[i](y, xi)))))
    viol["a_consistency"] = ac

    div_y = np.zeros_like(xi)
    for k in range(N):
        up = tuple(c + (h if j == k else 0.0) for j, c in enumerate(y))
        dn = tuple(c - (h if j == k else 0.0) for j, c in enumerate(y))
        div_y = div_y + (model.A[k](up, xi) - model.A[k](dn, xi)) / (2 * h)
    viol["divergence"] = float(np.max(np.abs(model.a[N](y, xi) + div_y)))

    div_full = (model.a[N](y, xi + h) - model.a[N](y, xi - h)) / (2 * h)
    for k in range(N):
        up = tuple(c + (h if j == k else 0.0) for j, c in enumerate(y))
        dn = tuple(c - (h if j == k else 0.0) for j, c in enumerate(y))
        div_full = div_full + (model.a[k](up, xi) - model.a[k](dn, xi)) / (2 * h)
    viol["free_divergence"] = float(np.max(np.abs(div_full)))

    if model.divergence_free:
        viol["tag_divfree"] = float(np.max(np.abs(model.a[N](y, xi))))
    if model.separate is not None:
        sep = model.separate
        gap = 0.0
        for i in range(N):
            gap = max(gap, float(np.max(np.abs(model.A[i](y, xi) - sep.a0[i](*y) * sep.g(xi)))))
        div_a0 = np.zeros_like(y[0])
        for k in range(N):
            up = tuple(c + (h if j == k else 0.0) for j, c in enumerate(y))
            dn = tuple(c - (h if j == k else 0.0) for j, c in enumerate(y))
            div_a0 = div_a0 + (sep.a0[k](*up) - sep.a0[k](*dn)) / (2 * h)
        viol["tag_separate"] = gap
        viol["a0_divfree"] = float(np.max(np.abs(div_a0)))
        gp = (sep.g(xi + h) - sep.g(xi - h)) / (2 * h)
        viol["g_prime"] = float(np.max(np.abs(gp - sep.g_prime(xi))))

    tol = tol_factor * h * h
    return ValidationReport(viol, h, tol, all(v <= tol for v in viol.values()))
