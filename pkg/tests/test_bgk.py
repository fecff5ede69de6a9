import numpy as np
import pytest

from oscillab.bgk import (BgkConfig, InvariantViolation, _relax, bgk_step,
                          hydrodynamic_study, make_bgk_state, run_bgk,
                          sample_cone_members, transport_cfl)
from oscillab.fluxes import builtin_flux
from oscillab.fv import SolverConfig, solve_parametric
from oscillab.grids import Grid, MacroField, chi_profile, moment
from oscillab.projections import ConstraintSpace, project_vector_field


def shear_setup(nx=(32, 8), ny2=12, nxi=32, base=0.5, amp=0.25):
    model = builtin_flux("shear")
    M = base + amp
    g = Grid(x_cells=nx, x_length=(1.0,) * len(nx), y_cells=(1, ny2), xi_cells=nxi,
             xi_max=1.3 * M + 0.05, support_bound=M)
    x1 = g.x_centers(0).reshape((-1,) + (1,) * (len(nx) + 1))
    u0 = MacroField((base + amp * np.sin(2 * np.pi * x1))
                    + np.zeros(g.x_cells + g.y_cells), g)
    space = ConstraintSpace("rows", model, g)
    return model, g, u0, space


def test_model_requires_divergence_free():
    model = builtin_flux("hetero_1d")
    g = Grid(x_cells=(16,), x_length=(1.0,), y_cells=(8,), xi_cells=16,
             xi_max=1.5, support_bound=1.0)
    u0 = MacroField(0.5 * np.ones(g.x_cells + g.y_cells), g)
    with pytest.raises(ValueError):
        make_bgk_state(u0, model, BgkConfig(lam=1.0, t_end=0.1), None)


def test_stationary_prepared_constant_state():
    # x-constant cell state: both split stages leave f unchanged
    model, g, _, space = shear_setup()
    u0 = MacroField(0.4 * np.ones(g.x_cells + g.y_cells), g)
    cfg = BgkConfig(lam=100.0, t_end=0.1)
    state = make_bgk_state(u0, model, cfg, space)
    f0 = state.f.values.copy()
    dt = transport_cfl(model, g, cfg.cfl)
    bgk_step(state, dt, cfg)
    assert np.max(np.abs(state.f.values - f0)) <= 1e-10


def test_lambda_zero_is_pure_transport_mass_per_channel():
    model, g, u0, space = shear_setup()
    cfg = BgkConfig(lam=0.0, t_end=0.05, n_cone_samples=0, verify=False)
    state = make_bgk_state(u0, model, cfg, space)
    mass0 = state.f.values.sum(axis=(0, 1))  # per (y, xi) channel
    dt = transport_cfl(model, g, cfg.cfl)
    bgk_step(state, dt, cfg)
    mass1 = state.f.values.sum(axis=(0, 1))
    np.testing.assert_allclose(mass1, mass0, atol=1e-12)


def test_relaxation_only_segment_bound():
    # one-parameter family bound: ||f_out - f*|| = mu/(1+mu) ||P(f*) - f*|| exactly
    model, g, u0, space = shear_setup(nx=(8, 2), ny2=6, nxi=24)
    cfg = BgkConfig(lam=50.0, t_end=0.1)
    state = make_bgk_state(u0, model, cfg, space)
    rng = np.random.default_rng(3)
    f_star = rng.uniform(-1, 1, size=state.f.values.shape)
    mu = 0.7
    f_out, proj, iters = _relax(f_star, state, mu, cfg.relax_tol, cfg.dykstra_tol)
    lhs = np.linalg.norm(f_out - f_star)
    rhs = mu / (1 + mu) * np.linalg.norm(proj - f_star)
    assert lhs <= rhs + 1e-9
    assert abs(lhs - rhs) <= 1e-9
    cap = int(np.ceil(np.log(cfg.relax_tol) / np.log(mu / (1 + mu)))) + 2
    assert iters <= cap


def test_run_invariants_and_l2_identity():
    model, g, u0, space = shear_setup()
    cfg = BgkConfig(lam=10.0, t_end=0.2)
    traj = run_bgk(u0, model, cfg, space, [0.1, 0.2])
    d = traj.diagnostics
    assert min(d.sign_min) >= -cfg.check_tol
    assert max(d.sup_abs) <= 1 + cfg.check_tol
    assert max(d.support_leak) <= cfg.check_tol
    assert all(b <= a + cfg.check_tol for a, b in zip(d.l2, d.l2[1:]))
    assert max(d.ml_pairing_max) <= cfg.check_tol
    # discrete L2 identity: ||f(0)||^2 = ||u0||_L1 up to fractional kinetic cells
    measure_xy = float(np.prod(g.dx)) * float(np.prod(g.dy))
    n_points = np.prod(g.x_cells + g.y_cells)
    assert traj.initial_l2_identity_gap <= 0.25 * g.dxi * measure_xy * n_points


def test_moments_stay_within_barriers():
    model, g, u0, space = shear_setup()
    cfg = BgkConfig(lam=100.0, t_end=0.2)
    traj = run_bgk(u0, model, cfg, space, [0.2])
    d = traj.diagnostics
    assert min(d.moment_min) >= u0.values.min() - cfg.check_tol
    assert max(d.moment_max) <= u0.values.max() + cfg.check_tol


def test_violation_aborts_with_diagnostics():
    model, g, u0, space = shear_setup(nx=(8, 2), ny2=4, nxi=16)
    cfg = BgkConfig(lam=5.0, t_end=0.1, check_tol=1e-9)
    state = make_bgk_state(u0, model, cfg, space)
    state.f.values[..., -1] = 0.5  # inject a support leak outside the window
    dt = transport_cfl(model, g, cfg.cfl)
    with pytest.raises(InvariantViolation) as exc:
        bgk_step(state, dt, cfg)
    assert exc.value.diagnostics is not None


def test_continuity_common_envelope_across_lambda():
    # strong continuity at t = 0: l1 distance from the initial state admits a
    # lambda-independent linear envelope K t with K from the transport bound
    model, g, u0, space = shear_setup(nx=(24, 4), ny2=8, nxi=24)
    f0 = chi_profile(u0.values, g)
    dx_flux = np.abs(np.diff(f0, axis=0, append=f0[:1])).sum() * g.dx[1] * \
        float(np.prod(g.dy)) * g.dxi
    K = 1.5 * dx_flux  # sup|a| = 1.5, shear transports along x1 only
    t_probe = 0.04
    for lam in (10.0, 100.0, 1000.0):
        cfg = BgkConfig(lam=lam, t_end=t_probe, n_cone_samples=0, verify=False)
        traj = run_bgk(u0, model, cfg, space, [t_probe])
        l1 = float(np.abs(traj.states[-1].values - f0).sum()) * \
            float(np.prod(g.dx)) * float(np.prod(g.dy)) * g.dxi
        assert l1 <= 1.2 * K * t_probe + 1e-12, lam


def test_sampled_members_belong_to_constraint_set():
    model, g, u0, space = shear_setup(nx=(8, 2), ny2=6, nxi=24)
    cfg = BgkConfig(lam=1.0, t_end=0.1)
    state = make_bgk_state(u0, model, cfg, space)
    members = sample_cone_members(state, 5, 1, cfg.dykstra_tol)
    for m in members:
        assert state.cone.membership_gap(m) <= 1e-9
        assert space.residual(m, xi_resolved=True) <= 1e-9


def test_hydrodynamic_study_lambda_zero_row_is_worst():
    model = builtin_flux("separate_burgers", structure="shear")
    g = Grid(x_cells=(48, 2), x_length=(1.0, 1.0), y_cells=(1, 8), xi_cells=32,
             xi_max=1.2, support_bound=0.9)
    x1 = g.x_centers(0)[:, None, None, None]
    u0 = MacroField((0.5 + 0.3 * np.sin(2 * np.pi * x1))
                    + np.zeros(g.x_cells + g.y_cells), g)
    space = ConstraintSpace("rows", model, g)
    coeffs = project_vector_field(model, space)
    t_end = 0.6
    times = np.linspace(0, t_end, 7)[1:]
    ref = solve_parametric(u0, coeffs, model.separate,
                           SolverConfig(t_end=t_end, entropy_ks=()), times)
    ref_map = {round(t, 12): f.values for t, f in zip(ref.times, ref.fields)}
    res = hydrodynamic_study(u0, model, [0.0, 10.0, 100.0], t_end,
                             lambda t: ref_map[round(t, 12)], space, n_times=7)
    errs = res["errors"]
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[0] > errs[2]
