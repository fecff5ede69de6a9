"""Experiment driver: parse a config, dispatch a pipeline, emit reports.

Subcommands: run, list, validate.  Exit codes: 0 success, 2 config/schema
violation, 3 invariant violation (with diagnostic dump), 4 numerical failure.
A manifest.json is always written to the output directory, also on failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class ConfigError(Exception):
    pass


PIPELINES = ("direct_convergence", "bgk_invariants", "hydrodynamic_limit",
             "cell_relaxation", "contraction_suite", "multiplier_sign")

CATALOG_INFO = [
    {"name": "shear", "dim": 2, "params": {"base": 1.0, "amplitude": 0.5},
     "about": "A = (a1(y2) xi, 0), divergence free, separate (g = id)"},
    {"name": "hamiltonian", "dim": 2, "params": {"amplitude": 0.159155, "g": "id"},
     "about": "A = a0(y) g(xi), a0 = (-d2 phi, d1 phi), closed orbits"},
    {"name": "separate_burgers", "dim": 2, "params": {"structure": "shear", "base": 1.0, "amplitude": 0.5},
     "about": "A = a0(y) xi^2/2, divergence free, separate"},
    {"name": "hetero_1d", "dim": 1, "params": {"amplitude": 0.5},
     "about": "A = b(y) + xi^2/2, not divergence free"},
    {"name": "homogeneous_burgers", "dim": 1, "params": {},
     "about": "A = xi^2/2, homogeneous"},
]

FAMILY_INFO = ["constant", "hamiltonian", "hetero_1d_branch", "shear (preparation)"]


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def load_config(path) -> dict:
    p = Path(path)
    _require(p.exists(), f"config file {path} does not exist")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    _require(isinstance(cfg, dict), "config must be a JSON object")
    _require(cfg.get("schema_version") == SCHEMA_VERSION,
             f"schema_version must be {SCHEMA_VERSION}")
    _require(cfg.get("pipeline") in PIPELINES,
             f"pipeline must be one of {PIPELINES}, got {cfg.get('pipeline')!r}")
    kin = cfg.get("kinetic", {})
    if "xi_max" in kin and "support_bound" in kin:
        _require(kin["xi_max"] > kin["support_bound"],
                 f"kinetic window must satisfy L > M, got L={kin['xi_max']}, M={kin['support_bound']}")
    return cfg


def _config_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _check(name, passed, value, tolerance):
    return {"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance}


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def _shear_setup(cfg):
    from .fluxes import builtin_flux
    fx = cfg.get("flux", {"name": "shear"})
    name = fx.get("name", "shear")
    params = {k: v for k, v in fx.items() if k != "name"}
    return builtin_flux(name, **params)


def pipeline_direct_convergence(cfg, out, rng):
    from .cells import compose_initial, prepare_initial_data
    from .diagnostics import (ConvergenceReport, MollifierSpec, central_window_mask,
                              strong_convergence_metric)
    from .fieldio import write_rows_csv
    from .fv import SolverConfig, Trajectory, solve_direct, solve_parametric
    from .grids import Grid, MacroField
    from .projections import ConstraintSpace, project_vector_field

    model = _shear_setup(cfg)
    _require(model.name == "shear", "direct_convergence supports the shear instance")
    p = cfg.get("params", {})
    eps_list = p.get("eps", [0.25, 0.125, 0.0625])
    delta_list = p.get("delta", [0.25, 0.125, 0.0625])
    cells_per_eps = int(p.get("cells_per_eps", 32))
    t_end = float(p.get("t_end", 0.5))
    n_out = int(p.get("out_times", 5))
    base = float(p.get("base", 0.5))
    amp = float(p.get("amplitude", 0.2))
    amp2 = float(p.get("amplitude2", 0.0))
    mode2 = int(p.get("mode2", 3))
    ref_kind = p.get("reference", "exact")
    ref_n = int(p.get("reference_x_cells", 512))
    ref_ny2 = int(p.get("reference_y2_cells", 128))
    x2_cells_ref = int(p.get("reference_x2_cells", 2))
    kin = cfg.get("kinetic", {})
    M = float(kin.get("support_bound", base + amp + amp2))
    L = float(kin.get("xi_max", 1.5 * M + 0.1))
    times = list(np.linspace(0.0, t_end, n_out))

    w = lambda x1, x2: (base + amp * np.sin(2 * np.pi * x1)
                        + amp2 * np.sin(2 * np.pi * mode2 * x1 + 1.0))

    ref_grid = Grid(x_cells=(ref_n, x2_cells_ref), x_length=(1.0, 1.0),
                    y_cells=(1, ref_ny2), xi_cells=16, xi_max=L, support_bound=M)
    x1r = ref_grid.x_centers(0)[:, None, None, None]
    if ref_kind == "exact":
        # closed-form transport per row: u(t, x, y2) = w(x1 - a1(y2) t)
        a1b = float(model.params.get("base", 1.0))
        a1a = float(model.params.get("amplitude", 0.5))
        a1 = lambda y2: a1b + a1a * np.sin(2 * np.pi * y2)
        y2r = ref_grid.y_centers(1)[None, None, None, :]
        ref_traj = Trajectory(
            [MacroField(w(x1r - a1(y2r) * t, 0.0)
                        + np.zeros(ref_grid.x_cells + ref_grid.y_cells), ref_grid, t)
             for t in times], list(times))
    else:
        u0_ref = MacroField(w(x1r, 0) + np.zeros(ref_grid.x_cells + ref_grid.y_cells), ref_grid)
        space = ConstraintSpace("rows", model, ref_grid)
        coeffs = project_vector_field(model, space)
        ref_traj = solve_parametric(u0_ref, coeffs, model.separate,
                                    SolverConfig(t_end=t_end, entropy_ks=()), times)

    matrix = np.zeros((len(eps_list), len(delta_list)))
    u0_l1_win = None
    runtimes = {}
    barrier_gap = 0.0
    save_fields = bool(p.get("save_fields", False))
    summary_rows = []
    for i, eps in enumerate(eps_list):
        n = int(round(cells_per_eps / eps))
        g = Grid(x_cells=(n, n), x_length=(1.0, 1.0), y_cells=(1, ref_ny2),
                 xi_cells=16, xi_max=L, support_bound=M, epsilon=eps)
        prep = prepare_initial_data(model, g, lambda x1, x2: w(x1, x2), "shear",
                                    s=lambda y2: np.ones_like(y2))
        u0c = compose_initial(prep, g)
        t0 = time.time()
        traj = solve_direct(u0c, model, SolverConfig(t_end=t_end, entropy_ks=()),
                            times, barriers=(prep.barriers.lo_fn, prep.barriers.hi_fn))
        runtimes[f"direct_eps_{eps:g}"] = time.time() - t0
        barrier_gap = min(barrier_gap, traj.barrier_gap)
        for tt, mass, sup in zip(traj.times, traj.mass, traj.sup):
            summary_rows.append({"eps": eps, "time": tt, "mass": mass, "sup": sup})
        if save_fields:
            from .fieldio import write_field
            for k, fld in enumerate(traj.fields):
                write_field(out / f"direct_eps_{eps:g}_t{k}.field", fld)
        win = central_window_mask(g)
        if u0_l1_win is None:
            weights = np.diff(times, prepend=times[0])
            u0_l1_win = float(sum(wt * np.abs(f.values)[win].sum() * np.prod(g.dx)
                                  for wt, f in zip(weights, traj.fields)))
        for j, delta in enumerate(delta_list):
            matrix[i, j] = strong_convergence_metric(
                traj, ref_traj, MollifierSpec(width=delta), g, win)

    report = ConvergenceReport(eps_list, delta_list, matrix, u0_l1_win,
                               {"cells_per_eps": cells_per_eps, "t_end": t_end})
    write_rows_csv(out / "convergence.csv", report.rows())
    write_rows_csv(out / "summary.csv", summary_rows)

    j_star = int(np.argmin(delta_list))
    col = matrix[:, j_star]
    checks = [
        _check("D_strictly_decreasing_in_eps", bool(np.all(np.diff(col) < 0)),
               [float(v) for v in col], None),
        _check("D_final_below_fraction", float(col[-1]) <= 0.05 * u0_l1_win,
               float(col[-1]), 0.05 * u0_l1_win),
        _check("barriers_respected", barrier_gap >= -1e-12, barrier_gap, -1e-12),
    ]
    return checks, runtimes, {"eps": eps_list, "delta": delta_list}


def pipeline_bgk_invariants(cfg, out, rng):
    from .bgk import BgkConfig, InvariantViolation, run_bgk
    from .fieldio import write_rows_csv
    from .grids import Grid, MacroField
    from .projections import ConstraintSpace

    model = _shear_setup(cfg)
    p = cfg.get("params", {})
    gx = p.get("x_cells", [64, 32])
    ny2 = int(p.get("y2_cells", 32))
    nxi = int(p.get("xi_cells", 64))
    lam = float(p.get("lam", 100.0))
    t_end = float(p.get("t_end", 0.5))
    base = float(p.get("base", 0.5))
    amp = float(p.get("amplitude", 0.25))
    M = base + amp
    L = float(cfg.get("kinetic", {}).get("xi_max", M * 1.25 + 0.05))
    g = Grid(x_cells=tuple(int(v) for v in gx), x_length=(1.0,) * len(gx),
             y_cells=(1, ny2), xi_cells=nxi, xi_max=L, support_bound=M)
    x1 = g.x_centers(0).reshape((-1,) + (1,) * (len(gx) - 1 + 2))
    u0 = MacroField((base + amp * np.sin(2 * np.pi * x1))
                    + np.zeros(g.x_cells + g.y_cells), g)
    space = ConstraintSpace(str(p.get("space", "rows")), model, g)
    bcfg = BgkConfig(lam=lam, t_end=t_end,
                     n_cone_samples=int(p.get("n_cone_samples", 20)),
                     sample_seed=int(cfg.get("seed", 0)) + 42)
    t0 = time.time()
    traj = run_bgk(u0, model, bcfg, space, [t_end])
    rt = {"bgk_run": time.time() - t0}
    write_rows_csv(out / "bgk_invariants.csv", traj.diagnostics.rows())
    if p.get("save_fields", False):
        from .fieldio import write_field
        for k, st in enumerate(traj.states):
            write_field(out / f"bgk_state_t{k}.field", st)
    d = traj.diagnostics
    checks = [
        _check("sign_property", min(d.sign_min) >= -bcfg.check_tol, min(d.sign_min), -bcfg.check_tol),
        _check("amplitude_bound", max(d.sup_abs) <= 1 + bcfg.check_tol, max(d.sup_abs), 1 + bcfg.check_tol),
        _check("kinetic_support", max(d.support_leak) <= bcfg.check_tol, max(d.support_leak), bcfg.check_tol),
        _check("l2_monotone", all(b <= a + bcfg.check_tol for a, b in zip(d.l2, d.l2[1:])),
               max((b - a for a, b in zip(d.l2, d.l2[1:])), default=0.0), bcfg.check_tol),
        _check("projection_pairing", max(d.ml_pairing_max) <= bcfg.check_tol,
               max(d.ml_pairing_max), bcfg.check_tol),
        _check("l2_identity_at_t0", traj.initial_l2_identity_gap <= g.dxi,
               traj.initial_l2_identity_gap, g.dxi),
    ]
    return checks, rt, {"grid": list(g.x_cells) + [ny2, nxi], "lam": lam}


def pipeline_hydrodynamic_limit(cfg, out, rng):
    from .bgk import BgkConfig, run_bgk
    from .fieldio import write_rows_csv
    from .grids import Grid, MacroField, chi_profile
    from .projections import ConstraintSpace, project_vector_field

    model = _shear_setup(cfg)
    p = cfg.get("params", {})
    mode = p.get("mode", "constraint")
    lambdas = [float(v) for v in p.get("lambdas", [10.0, 100.0, 1000.0])]
    t_end = float(p.get("t_end", 0.4))
    n_times = int(p.get("n_times", 9))

    if mode == "constraint":
        _require(model.name == "shear", "constraint mode runs on the shear instance")
        nx1 = int(p.get("x_cells", 64)); nx2 = int(p.get("x2_cells", 2))
        ny1 = int(p.get("y1_cells", 16)); ny2 = int(p.get("y2_cells", 8))
        nxi = int(p.get("xi_cells", 32))
        base = float(p.get("base", 0.45)); amp = float(p.get("amplitude", 0.2))
        osc = float(p.get("oscillation", 0.55))
        M = (base + amp) * (1 + osc)
        g = Grid(x_cells=(nx1, nx2), x_length=(1.0, 1.0), y_cells=(ny1, ny2),
                 xi_cells=nxi, xi_max=1.25 * M + 0.05, support_bound=M * 1.001)
        x1 = g.x_centers(0)[:, None, None, None]
        y1 = g.y_centers(0)[None, None, :, None]
        w = lambda x: base + amp * np.sin(2 * np.pi * x)
        s = lambda y: 1.0 + osc * np.sin(2 * np.pi * y)
        u0 = MacroField(w(x1) * s(y1) + np.zeros(g.x_cells + g.y_cells), g)
        space = ConstraintSpace("rows", model, g)
        a1b = float(model.params.get("base", 1.0)); a1a = float(model.params.get("amplitude", 0.5))
        a1 = lambda y2: a1b + a1a * np.sin(2 * np.pi * y2)
        y2g, y1g = g.y_centers(1), g.y_centers(0)

        def reference(t):
            shifts = g.x_centers(0)[:, None] - a1(y2g)[None, :] * t
            levels = w(shifts)[:, :, None] * s(y1g)[None, None, :]
            prof = chi_profile(levels, g).mean(axis=2)
            return prof[:, None, None, :, :] + np.zeros(g.x_cells + g.y_cells + (nxi,))

        times = np.linspace(0.0, t_end, n_times)[1:]
        weights = np.diff(np.concatenate([[0.0], times]))
        measure = float(np.prod(g.dx)) * float(np.prod(g.dy)) * g.dxi
        errors = []
        for lam in lambdas:
            bcfg = BgkConfig(lam=lam, t_end=t_end, n_cone_samples=0, verify=False)
            traj = run_bgk(u0, model, bcfg, space, times)
            err = np.sqrt(sum(
                wt * float(((st.values - reference(t)) ** 2).sum()) * measure
                for wt, t, st in zip(weights, times, traj.states[1:])))
            errors.append(float(err))
    else:
        _require(model.separate is not None, "prepared mode needs a separate flux")
        from .bgk import hydrodynamic_study
        from .fv import SolverConfig, solve_parametric
        nx1 = int(p.get("x_cells", 64)); nx2 = int(p.get("x2_cells", 2))
        ny2 = int(p.get("y2_cells", 8)); nxi = int(p.get("xi_cells", 32))
        base = float(p.get("base", 0.5)); amp = float(p.get("amplitude", 0.3))
        M = base + amp
        g = Grid(x_cells=(nx1, nx2), x_length=(1.0, 1.0), y_cells=(1, ny2),
                 xi_cells=nxi, xi_max=1.3 * M + 0.05, support_bound=M * 1.001)
        x1 = g.x_centers(0)[:, None, None, None]
        u0 = MacroField((base + amp * np.sin(2 * np.pi * x1))
                        + np.zeros(g.x_cells + g.y_cells), g)
        space = ConstraintSpace("rows", model, g)
        coeffs = project_vector_field(model, space)
        times = np.linspace(0.0, t_end, n_times)[1:]
        ref = solve_parametric(u0, coeffs, model.separate,
                               SolverConfig(t_end=t_end, entropy_ks=()), times)
        ref_map = {round(t, 12): f.values for t, f in zip(ref.times, ref.fields)}
        res = hydrodynamic_study(u0, model, lambdas, t_end,
                                 lambda t: ref_map[round(t, 12)], space, n_times=n_times)
        errors = res["errors"]

    write_rows_csv(out / "hydro.csv",
                   [{"lam": l, "l2_error": e} for l, e in zip(lambdas, errors)])
    checks = [_check("errors_nonincreasing",
                     all(b <= a * (1 + 1e-12) for a, b in zip(errors, errors[1:])),
                     errors, None)]
    if mode == "constraint" and len(errors) >= 2:
        checks.append(_check("largest_lambda_below_third",
                             errors[-1] <= errors[0] / 3.0, errors[-1], errors[0] / 3.0))
    return checks, {}, {"mode": mode, "lambdas": lambdas}


def pipeline_cell_relaxation(cfg, out, rng):
    from .cells import relax_to_cell, stationary_family
    from .fieldio import write_rows_csv
    from .grids import Grid

    model = _shear_setup(cfg)
    p = cfg.get("params", {})
    family = p.get("family", "hamiltonian")
    ny = int(p.get("y_cells", 32))
    pert = float(p.get("perturbation", 0.1))
    pseudo_t = float(p.get("pseudo_t", 40.0))
    tol = float(p.get("tol", 1e-4))
    dims = (ny,) * model.dim
    g = Grid(y_cells=dims, xi_cells=32, xi_max=2.0, support_bound=1.5)
    base = stationary_family(model, family, g, **p.get("family_params", {}))
    v0 = base.v * (1.0 + pert * rng.standard_normal(base.v.shape))
    sol = relax_to_cell(model, v0, g, pseudo_t=pseudo_t, tol=tol)
    write_rows_csv(out / "cell_relaxation.csv",
                   [{"step": i, "march_residual": r} for i, r in enumerate(sol.march_residuals)])
    checks = [
        _check("march_converged", sol.converged, sol.march_residuals[-1], tol),
        _check("march_residual_below_tol", sol.march_residuals[-1] <= tol,
               sol.march_residuals[-1], tol),
    ]
    return checks, {}, {"family": family, "y_cells": list(dims)}


def pipeline_contraction_suite(cfg, out, rng):
    from .cells import compose_initial, prepare_initial_data
    from .diagnostics import contraction_check, exponential_cutoff
    from .fieldio import write_rows_csv
    from .fv import SolverConfig, solve_direct
    from .grids import Grid, MacroField
    from .limits import solve_limit_separate
    from .projections import ConstraintSpace

    model = _shear_setup(cfg)
    _require(model.name == "shear", "contraction_suite runs on the shear instance")
    p = cfg.get("params", {})
    eps = float(p.get("eps", 0.25))
    n = int(p.get("x_cells", 96))
    t_end = float(p.get("t_end", 0.5))
    times = list(np.linspace(0.0, t_end, int(p.get("out_times", 6))))
    g = Grid(x_cells=(n, n), x_length=(1.0, 1.0), y_cells=(1, 16), xi_cells=16,
             xi_max=1.5, support_bound=1.0, epsilon=eps)
    scfg = SolverConfig(t_end=t_end, entropy_ks=())

    profiles = [lambda x1, x2: 0.5 + 0.25 * np.sin(2 * np.pi * x1),
                lambda x1, x2: 0.5 + 0.2 * np.cos(2 * np.pi * x1) * np.sin(2 * np.pi * x2)]
    trajs = []
    for prof in profiles:
        prep = prepare_initial_data(model, g, prof, "shear", s=lambda y2: np.ones_like(y2))
        trajs.append(solve_direct(compose_initial(prep, g), model, scfg, times))
    margins_plain = contraction_check(trajs[0], trajs[1], growth=0.0)

    # weighted margin on the limit solver over a wide box
    box = float(p.get("box", 8.0))
    nl = int(p.get("limit_x_cells", 128))
    gl = Grid(x_cells=(nl, 4), x_length=(box, box), y_cells=(1, 16), xi_cells=16,
              xi_max=1.5, support_bound=1.0)
    space = ConstraintSpace("rows", model, gl)
    xc = gl.x_centers(0)[:, None, None, None]
    bump = lambda c, w_: np.exp(-((xc - c) / w_) ** 2)
    u1 = MacroField(0.4 * bump(box / 2 - 0.5, 0.6) + np.zeros(gl.x_cells + gl.y_cells), gl)
    u2 = MacroField(0.4 * bump(box / 2 + 0.5, 0.8) + np.zeros(gl.x_cells + gl.y_cells), gl)
    lcfg = SolverConfig(t_end=1.0, entropy_ks=())
    lt = list(np.linspace(0.0, 1.0, 6))
    s1 = solve_limit_separate(u1, model, space, lcfg, lt)
    s2 = solve_limit_separate(u2, model, space, lcfg, lt)
    growth = model.speed_bound(gl.support_bound)
    zeta = exponential_cutoff(gl)
    margins_w = contraction_check(s1.trajectory, s2.trajectory, growth, zeta)

    rows = [{"time": t, "kind": "direct_plain", "margin": m}
            for t, m in zip(trajs[0].times, margins_plain)]
    rows += [{"time": t, "kind": "limit_weighted", "margin": m}
             for t, m in zip(lt, margins_w)]
    write_rows_csv(out / "contraction.csv", rows)
    dx = gl.dx[0]
    checks = [
        _check("direct_l1_contraction", min(margins_plain) >= -1e-12,
               min(margins_plain), -1e-12),
        _check("weighted_margin", min(margins_w) >= -10 * dx, min(margins_w), -10 * dx),
    ]
    return checks, {}, {"eps": eps}


def pipeline_multiplier_sign(cfg, out, rng):
    from .fieldio import write_rows_csv
    from .fv import SolverConfig
    from .grids import Grid, MacroField
    from .limits import check_multiplier_sign, multiplier_test_functions
    from .projections import ConstraintSpace

    model = _shear_setup(cfg)
    p = cfg.get("params", {})
    n = int(p.get("x_cells", 64))
    ny2 = int(p.get("y2_cells", 16))
    nxi = int(p.get("xi_cells", 32))
    t_end = float(p.get("t_end", 0.4))
    n_psi = int(p.get("n_psi", 10))
    n_probes = int(p.get("n_probes", 50))
    g = Grid(x_cells=(n, 2), x_length=(1.0, 1.0), y_cells=(1, ny2), xi_cells=nxi,
             xi_max=1.2, support_bound=0.9)
    x1 = g.x_centers(0)[:, None, None, None]
    u0 = MacroField((0.5 + 0.25 * np.sin(2 * np.pi * x1))
                    + np.zeros(g.x_cells + g.y_cells), g)
    space = ConstraintSpace("rows", model, g)
    psis = multiplier_test_functions(g, n_psi, seed=int(cfg.get("seed", 0)) + 11)
    rep = check_multiplier_sign(u0, model, space, SolverConfig(t_end=t_end, entropy_ks=()),
                                psis, n_probes=n_probes, seed=int(cfg.get("seed", 0)) + 23)
    rows = []
    for ip in range(rep.pairings.shape[0]):
        for jp, (tn, xi_idx) in enumerate(rep.probes):
            rows.append({"psi": ip, "probe_step": tn,
                         "probe_x": "/".join(str(v) for v in xi_idx),
                         "pairing": float(rep.pairings[ip, jp])})
    write_rows_csv(out / "multiplier_sign.csv", rows)
    checks = [
        _check("pairings_below_tol", rep.max_pairing <= rep.tol, rep.max_pairing, rep.tol),
        _check("kinetic_march_conservative", rep.conservation_gap <= 1e-12,
               rep.conservation_gap, 1e-12),
    ]
    return checks, {}, {"n_psi": n_psi, "n_probes": n_probes}


PIPELINE_FUNCS = {
    "direct_convergence": pipeline_direct_convergence,
    "bgk_invariants": pipeline_bgk_invariants,
    "hydrodynamic_limit": pipeline_hydrodynamic_limit,
    "cell_relaxation": pipeline_cell_relaxation,
    "contraction_suite": pipeline_contraction_suite,
    "multiplier_sign": pipeline_multiplier_sign,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run_experiment(config_path, out_dir, threads: int = 1, seed: int | None = None) -> int:
    from .bgk import InvariantViolation
    from .fieldio import write_manifest

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"schema_version": SCHEMA_VERSION, "status": "fail", "exit_code": None,
                "checks": [], "runtimes": {}, "outputs": [], "meta": {}}
    t_start = time.time()
    try:
        cfg = load_config(config_path)
        manifest["pipeline"] = cfg["pipeline"]
        manifest["config_sha256"] = _config_hash(config_path)
        if seed is not None:
            cfg["seed"] = seed
        manifest["seed"] = int(cfg.get("seed", 0))
        rng = np.random.default_rng(manifest["seed"])
        checks, runtimes, meta = PIPELINE_FUNCS[cfg["pipeline"]](cfg, out, rng)
        manifest["checks"] = checks
        manifest["runtimes"] = runtimes
        manifest["meta"] = meta
        ok = all(c["passed"] for c in checks)
        manifest["status"] = "pass" if ok else "fail"
        code = 0 if ok else 3
    except ConfigError as e:
        manifest["error"] = str(e)
        code = 2
    except InvariantViolation as e:
        manifest["error"] = str(e)
        if e.diagnostics is not None:
            dump = out / "diagnostic_dump.json"
            dump.write_text(json.dumps(
                {"violations": e.diagnostics.violations,
                 "last_time": e.diagnostics.times[-1] if e.diagnostics.times else None,
                 "rows": list(e.diagnostics.rows())[-20:]}, indent=2))
            manifest["outputs"].append(dump.name)
        code = 3
    except (FloatingPointError, ValueError, RuntimeError) as e:
        manifest["error"] = str(e)
        code = 4
    manifest["exit_code"] = code
    manifest["runtimes"]["total"] = time.time() - t_start
    manifest["outputs"] += sorted(p.name for p in out.glob("*.csv"))
    write_manifest(out / "manifest.json", manifest)
    return code


def list_catalog(as_json: bool = False) -> str:
    if as_json:
        return json.dumps({"fluxes": CATALOG_INFO, "families": FAMILY_INFO,
                           "pipelines": list(PIPELINES)}, indent=2, sort_keys=True)
    lines = ["fluxes:"]
    for f in CATALOG_INFO:
        lines.append(f"  {f['name']:20s} dim={f['dim']}  {f['about']}")
        if f["params"]:
            lines.append(f"  {'':20s} params: {json.dumps(f['params'], sort_keys=True)}")
    lines.append("stationary families:")
    for fam in FAMILY_INFO:
        lines.append(f"  {fam}")
    lines.append("pipelines:")
    for p in PIPELINES:
        lines.append(f"  {p}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="oscillab",
                                     description="oscillatory conservation-law laboratory")
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run one experiment from a config file")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--seed", type=int, default=None)

    list_p = sub.add_parser("list", help="print the catalog")
    list_p.add_argument("--json", action="store_true")

    val_p = sub.add_parser("validate", help="validate a config file")
    val_p.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    if args.command == "run":
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
        os.environ.setdefault("OPENBLAS_NUM_THREADS", str(args.threads))
        return run_experiment(args.config, args.out, args.threads, args.seed)
    if args.command == "list":
        print(list_catalog(args.json))
        return 0
    if args.command == "validate":
        try:
            load_config(args.config)
        except ConfigError as e:
            print(f"invalid config: {e}", file=sys.stderr)
            return 2
        print("config ok")
        return 0
    parser.print_usage(sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
