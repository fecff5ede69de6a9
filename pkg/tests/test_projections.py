import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from oscillab.fluxes import builtin_flux
from oscillab.grids import Grid, chi_profile, indicator_profile, indicator_reference
from oscillab.projections import (CharacteristicFlow, ChiCone, ConstraintSpace,
                                  make_chi_cone, pav_nonincreasing, project_chi_cone,
                                  project_intersection, project_vector_field)


# ---------------------------------------------------------------------------
# QP oracles for the profile cone
# ---------------------------------------------------------------------------

def cone_constraints(cone: ChiCone):
    """(G, h, pins): inequality rows G x <= h and pinned indices/values."""
    n = cone.grid.xi_cells
    rows, rhs = [], []
    for k in range(1, n):
        r = np.zeros(n)
        r[k] = 1.0
        r[k - 1] = -1.0
        rows.append(r)
        rhs.append(1.0 if k == cone.zero_interface else 0.0)
    pins = {}
    for k in range(n):
        if k < cone.k_lo or k > cone.k_hi:
            pins[k] = 0.0
    return np.array(rows), np.array(rhs), pins


def _kkt_polish(y, G, h, pin_rows, pin_rhs, active):
    """Exact equality-constrained solve for a candidate active set.

    The polished point is accepted when it is primal feasible and its gradient
    y - x decomposes over the active normals with nonnegative inequality
    multipliers (checked by nonnegative least squares, which tolerates
    redundant active constraints).
    """
    from scipy.optimize import nnls
    n = len(y)
    C = np.vstack([pin_rows, G[active]]) if active else pin_rows
    d = np.concatenate([pin_rhs, h[active]]) if active else pin_rhs
    y = np.asarray(y, dtype=float)
    if C.shape[0] == 0:
        x = y.copy()
    else:
        # minimum-norm solve of the (possibly redundant) equality projection
        x = y - C.T @ np.linalg.lstsq(C @ C.T, C @ y - d, rcond=None)[0]
    if np.any(G @ x - h > 1e-10):
        return None
    grad = y - x
    if np.linalg.norm(grad) > 1e-13:
        cols = [pin_rows.T, -pin_rows.T] if len(pin_rhs) else []
        if active:
            cols.append(G[active].T)
        M = np.hstack(cols) if cols else np.zeros((n, 0))
        if M.shape[1] == 0:
            return None
        _, resid = nnls(M, grad)
        if resid > 1e-9:
            return None
    return x


def qp_oracle_cvxopt(y, cone):
    """Interior-point QP solve with exact KKT polish (independent oracle).

    The interior point proposes an active set; the polished point certifies
    its own optimality through the KKT conditions, so the oracle is exact.
    """
    from cvxopt import matrix, solvers
    G, h, pins = cone_constraints(cone)
    n = len(y)
    pin_rows = np.zeros((len(pins), n))
    pin_rhs = np.zeros(len(pins))
    for i, (k, v) in enumerate(sorted(pins.items())):
        pin_rows[i, k] = 1.0
        pin_rhs[i] = v
    opts = {"show_progress": False, "abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-10}
    sol = solvers.qp(matrix(np.eye(n)), matrix(-np.asarray(y, dtype=float)),
                     matrix(G), matrix(h),
                     matrix(pin_rows) if len(pins) else None,
                     matrix(pin_rhs) if len(pins) else None, options=opts)
    x_ip = np.asarray(sol["x"]).ravel()
    slack = h - G @ x_ip
    for thresh in (1e-7, 1e-6, 1e-5, 1e-4, 1e-3):
        active = [i for i in range(len(h)) if slack[i] < thresh]
        x = _kkt_polish(y, G, h, pin_rows, pin_rhs, active)
        if x is not None:
            return x
    raise AssertionError(f"oracle polish failed (status {sol['status']}, gap {sol['gap']:.2e})")


def qp_oracle_enumerate(y, cone):
    """Exhaustive active-set enumeration (exact for tiny instances)."""
    G, h, pins = cone_constraints(cone)
    n = len(y)
    pin_rows = np.zeros((len(pins), n))
    pin_rhs = np.zeros(len(pins))
    for i, (k, v) in enumerate(sorted(pins.items())):
        pin_rows[i, k] = 1.0
        pin_rhs[i] = v
    m = len(G)
    best = None
    for active in itertools.product([0, 1], repeat=m):
        idx = [i for i in range(m) if active[i]]
        C = np.vstack([pin_rows] + [G[idx]]) if idx else pin_rows
        d = np.concatenate([pin_rhs, h[idx]]) if idx else pin_rhs
        if C.shape[0] == 0:
            x = np.asarray(y, dtype=float)
            lam = np.array([])
        else:
            K = np.block([[np.eye(n), C.T], [C, np.zeros((C.shape[0], C.shape[0]))]])
            rhs = np.concatenate([y, d])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            lam = sol[n + len(pins):]
        if np.any(G @ x - h > 1e-10):
            continue
        if lam.size and np.any(lam < -1e-10):
            continue
        val = 0.5 * np.sum((x - y) ** 2)
        if best is None or val < best[0] - 1e-14:
            best = (val, x)
    return best[1]


def small_cone(n=8, M=0.55):
    g = Grid(xi_cells=n, xi_max=1.0, support_bound=M)
    return g, make_chi_cone(g)


def test_oracles_agree_on_tiny_instances():
    g, cone = small_cone(8)
    rng = np.random.default_rng(7)
    for _ in range(25):
        y = rng.uniform(-1.5, 1.5, size=8)
        a = qp_oracle_cvxopt(y, cone)
        b = qp_oracle_enumerate(y, cone)
        assert np.max(np.abs(a - b)) < 1e-7


def test_projection_matches_oracle_random_suite():
    rng = np.random.default_rng(0)
    for n in (12, 16, 20):
        g = Grid(xi_cells=n, xi_max=1.0, support_bound=0.62)
        cone = make_chi_cone(g)
        for _ in range(40):
            y = rng.uniform(-1.5, 1.5, size=n)
            mine = project_chi_cone(y, cone)
            oracle = qp_oracle_cvxopt(y, cone)
            assert np.max(np.abs(mine - oracle)) < 1e-8
            # zeroth moments agree within a cell (macroscopic coupling contract)
            assert abs(mine.sum() - oracle.sum()) * g.dxi <= g.dxi


def test_cone_members_fixed():
    g, cone = small_cone(20, M=0.7)
    for u in (0.5, -0.3, 0.0, 0.65):
        phi = chi_profile(u, g)
        assert np.max(np.abs(project_chi_cone(phi, cone) - phi)) <= 1e-12
        # the indicator profile shifted by the sublevel reference is chi itself
        f = indicator_profile(u, g) - indicator_reference(g)
        assert np.max(np.abs(project_chi_cone(f, cone) - f)) <= 1e-12


def test_cone_jump_budget_on_ones():
    g, cone = small_cone(20, M=0.7)
    ones = np.zeros(20)
    ones[cone.k_lo:cone.k_hi + 1] = 1.0
    out = project_chi_cone(ones, cone)
    assert cone.membership_gap(out) <= 1e-10
    zi = cone.zero_interface
    assert out[zi] - out[zi - 1] <= 1.0 + 1e-12


def test_pav_properties():
    rng = np.random.default_rng(3)
    y = rng.standard_normal((50, 16))
    out = pav_nonincreasing(y)
    assert np.all(np.diff(out, axis=-1) <= 1e-12)
    np.testing.assert_allclose(out.sum(axis=-1), y.sum(axis=-1), atol=1e-10)
    np.testing.assert_allclose(pav_nonincreasing(out), out, atol=1e-13)


# ---------------------------------------------------------------------------
# constraint spaces
# ---------------------------------------------------------------------------

def shear_space(kind, n=32, **kw):
    g = Grid(y_cells=(n, n), xi_cells=16, xi_max=1.0, support_bound=0.5)
    return ConstraintSpace(kind, builtin_flux("shear"), g, **kw), g


def test_rows_projection_closed_form():
    space, g = shear_space("rows", 64)
    y1 = g.y_centers(0)[:, None]
    y2 = g.y_centers(1)[None, :]
    f = np.sin(2 * np.pi * y1) + np.cos(2 * np.pi * y2) + 0 * y1
    out = space.project_slice(f)
    assert np.max(np.abs(out - (np.cos(2 * np.pi * y2) + 0 * y1))) <= 1e-12


def test_idempotence_and_orthogonality_all_realizations():
    rng = np.random.default_rng(5)
    f = rng.standard_normal((32, 32))
    for kind in ("rows", "nullspace", "ergodic"):
        space, g = shear_space(kind)
        p = space.project_slice(f.copy())
        p2 = space.project_slice(p.copy())
        assert np.max(np.abs(p2 - p)) <= 1e-10, kind
        # orthogonality against discrete members (row indicators)
        for j in range(0, 32, 5):
            ind = np.zeros((32, 32))
            ind[:, j] = 1.0
            assert abs(np.mean((f - p) * ind)) <= 1e-8, kind


def test_nullspace_matches_rows():
    rng = np.random.default_rng(6)
    f = rng.standard_normal((32, 32))
    rows, _ = shear_space("rows")
    null, _ = shear_space("nullspace")
    assert np.max(np.abs(rows.project_slice(f) - null.project_slice(f.copy()))) <= 1e-8


def test_ergodic_matches_rows():
    rng = np.random.default_rng(7)
    f = rng.standard_normal((32, 32))
    rows, _ = shear_space("rows")
    erg, _ = shear_space("ergodic")
    assert np.max(np.abs(rows.project_slice(f) - erg.project_slice(f.copy()))) <= 1e-8


def test_degenerate_rows_are_fixed_points():
    # a1(y2) = sin(2 pi y2) vanishes on two rows; there the projection is the identity
    g = Grid(y_cells=(16, 16), xi_cells=16, xi_max=1.0, support_bound=0.5)
    model = builtin_flux("shear", base=0.0, amplitude=1.0)
    space = ConstraintSpace("rows", model, g)
    rng = np.random.default_rng(8)
    f = rng.standard_normal((16, 16))
    out = space.project_slice(f)
    dead = ~space._live_rows
    assert dead.sum() == 0 or np.max(np.abs(out[:, dead] - f[:, dead])) == 0.0


def test_ergodic_horizon_doubling_check():
    space, g = shear_space("ergodic", 16)
    rng = np.random.default_rng(9)
    f = rng.standard_normal((16, 16))
    gap = space.horizon_check(f)
    assert np.isfinite(gap) and gap < 0.1


def test_flow_volume_preservation():
    g = Grid(y_cells=(24, 24), xi_cells=16, xi_max=1.0, support_bound=0.5)
    for name in ("shear", "hamiltonian"):
        flow = CharacteristicFlow(builtin_flux(name), g)
        assert flow.volume_error(horizon=200.0) <= 1e-6, name


def test_project_vector_field_shear_fixed():
    space, g = shear_space("rows")
    tilde = project_vector_field(builtin_flux("shear"), space)
    assert np.max(np.abs(tilde[0] - space._a0[0])) <= 1e-12
    assert np.max(np.abs(tilde[1])) <= 1e-12


def test_project_vector_field_hamiltonian_zero_mean_preserved():
    # closed orbits: the projected coefficients vanish; means are preserved (both 0)
    g = Grid(y_cells=(24, 24), xi_cells=16, xi_max=1.0, support_bound=0.5)
    model = builtin_flux("hamiltonian")
    space = ConstraintSpace("ergodic", model, g)
    tilde = project_vector_field(model, space)
    for t, a in zip(tilde, space._a0):
        assert abs(t.mean() - a.mean()) <= 1e-10
        assert np.max(np.abs(t)) <= 1e-8


def test_constant_field_projection():
    space, g = shear_space("rows")
    c = 0.7 * np.ones((32, 32))
    assert np.max(np.abs(space.project_slice(c) - 0.7)) <= 1e-14


# ---------------------------------------------------------------------------
# the intersection projection
# ---------------------------------------------------------------------------

def test_intersection_fixed_point_on_cell_profiles():
    g = Grid(y_cells=(1, 16), xi_cells=32, xi_max=1.0, support_bound=0.8)
    model = builtin_flux("shear")
    space = ConstraintSpace("rows", model, g)
    cone = make_chi_cone(g)
    u = 0.4 + 0.2 * np.sin(2 * np.pi * g.y_centers(1))  # y1-independent cell state
    prof = chi_profile(np.broadcast_to(u, g.y_cells), g)
    res = project_intersection(prof, space, cone, tol=1e-11)
    assert res.converged
    assert np.max(np.abs(res.value - prof)) <= 1e-10


def test_intersection_commutes_with_cone_for_shear():
    # f in the constraint space but violating the cone: intersection projection
    # equals the cone projection (cone acts per column, commutes with averaging)
    g = Grid(y_cells=(1, 8), xi_cells=24, xi_max=1.0, support_bound=0.7)
    model = builtin_flux("shear")
    space = ConstraintSpace("rows", model, g)
    cone = make_chi_cone(g)
    rng = np.random.default_rng(11)
    f = rng.uniform(-1, 1, size=g.y_cells + (24,))
    res = project_intersection(f, space, cone, tol=1e-11)
    assert np.max(np.abs(res.value - project_chi_cone(f, cone))) <= 1e-8


def test_intersection_nonexpansive():
    g = Grid(y_cells=(1, 6), xi_cells=20, xi_max=1.0, support_bound=0.7)
    model = builtin_flux("shear")
    space = ConstraintSpace("rows", model, g)
    cone = make_chi_cone(g)
    rng = np.random.default_rng(12)
    for _ in range(100):
        f = rng.uniform(-1, 1, size=g.y_cells + (20,))
        h = rng.uniform(-1, 1, size=g.y_cells + (20,))
        pf = project_intersection(f, space, cone, tol=1e-11).value
        ph = project_intersection(h, space, cone, tol=1e-11).value
        assert np.linalg.norm(pf - ph) <= np.linalg.norm(f - h) + 1e-9


def test_intersection_reports_gap_on_iteration_cap():
    # y1-resolved shear: averaging and the cone genuinely conflict, so a
    # one-cycle cap cannot meet an impossible tolerance
    g = Grid(y_cells=(4, 6), xi_cells=20, xi_max=1.0, support_bound=0.7)
    model = builtin_flux("shear")
    space = ConstraintSpace("rows", model, g)
    cone = make_chi_cone(g)
    rng = np.random.default_rng(13)
    f = rng.uniform(-1, 1, size=g.y_cells + (20,))
    res = project_intersection(f, space, cone, tol=1e-30, max_iter=1)
    assert not res.converged and res.gap > 0


def test_intersection_converges_with_resolved_cell_direction():
    # Dykstra between genuine row averaging and the cone lands in both sets
    g = Grid(y_cells=(4, 6), xi_cells=20, xi_max=1.0, support_bound=0.7)
    model = builtin_flux("shear")
    space = ConstraintSpace("rows", model, g)
    cone = make_chi_cone(g)
    rng = np.random.default_rng(14)
    f = rng.uniform(-1, 1, size=g.y_cells + (20,))
    res = project_intersection(f, space, cone, tol=1e-11, max_iter=2000)
    assert res.converged
    assert cone.membership_gap(res.value) <= 1e-9
    assert space.residual(res.value, xi_resolved=True) <= 1e-9


def test_projection_moment_matches_oracle_fifty_cells():
    # the zeroth moment of the projected profile sits within one cell of the
    # L2 best approximation computed by the QP oracle
    rng = np.random.default_rng(50)
    g = Grid(xi_cells=50, xi_max=1.0, support_bound=0.7)
    cone = make_chi_cone(g)
    for _ in range(10):
        y = chi_profile(rng.uniform(-0.6, 0.6), g) + 0.3 * rng.standard_normal(50)
        mine = project_chi_cone(y, cone)
        oracle = qp_oracle_cvxopt(y, cone)
        assert np.max(np.abs(mine - oracle)) <= 1e-8
        assert abs(mine.sum() - oracle.sum()) * g.dxi <= g.dxi


@settings(max_examples=120, deadline=None)
@given(st.lists(st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
                min_size=16, max_size=16))
def test_cone_projection_properties(values):
    g = Grid(xi_cells=16, xi_max=1.0, support_bound=0.6)
    cone = make_chi_cone(g)
    y = np.asarray(values)
    out = project_chi_cone(y, cone)
    assert cone.membership_gap(out) <= 1e-10          # feasible
    out2 = project_chi_cone(out, cone)
    assert np.max(np.abs(out2 - out)) <= 1e-12        # idempotent
    assert np.sum((out - y) ** 2) <= np.sum(y ** 2) + 1e-12  # no farther than 0
