import json
import subprocess
import sys
import numpy as np
import pytest

from oscillab.cli import ConfigError, list_catalog, load_config, run_experiment
from oscillab.fieldio import (field_to_csv, read_field, read_rows_csv, write_field,
                              write_rows_csv)
from oscillab.grids import Grid, KineticField, MacroField, chi_profile


def test_field_binary_roundtrip_macro(tmp_path):
    g = Grid(x_cells=(8, 6), x_length=(1.0, 2.0), xi_cells=16, xi_max=1.2,
             support_bound=0.9, epsilon=0.25)
    rng = np.random.default_rng(0)
    f = MacroField(rng.standard_normal(g.x_cells), g, time=0.75)
    p = tmp_path / "m.field"
    write_field(p, f)
    back = read_field(p)
    np.testing.assert_array_equal(back.values, f.values)
    assert back.grid.x_cells == g.x_cells
    assert back.grid.x_length == g.x_length
    assert back.grid.epsilon == 0.25
    assert back.time == 0.75


def test_field_binary_roundtrip_kinetic(tmp_path):
    g = Grid(x_cells=(4,), x_length=(1.0,), y_cells=(1, 6), xi_cells=12,
             xi_max=1.0, support_bound=0.5)
    vals = chi_profile(0.3 * np.ones(g.x_cells + g.y_cells), g)
    f = KineticField(vals, g, time=0.1, form="chi")
    p = tmp_path / "k.field"
    write_field(p, f)
    back = read_field(p)
    assert isinstance(back, KineticField) and back.form == "chi"
    np.testing.assert_array_equal(back.values, vals)
    assert back.grid.y_cells == (1, 6)
    assert back.grid.xi_cells == 12


def test_field_csv_export(tmp_path):
    g = Grid(x_cells=(4, 3), x_length=(1.0, 1.0), xi_cells=16, xi_max=1.0,
             support_bound=0.5)
    f = MacroField(np.arange(12, dtype=float).reshape(4, 3), g)
    p = tmp_path / "f.csv"
    field_to_csv(p, f)
    rows = read_rows_csv(p)
    assert len(rows) == 12
    assert set(rows[0].keys()) == {"x1", "x2", "value"}
    assert float(rows[-1]["value"]) == 11.0


def test_rows_csv_roundtrip_precision(tmp_path):
    rows = [{"a": 1 / 3, "b": "x"}, {"a": 2.0 ** -52, "b": "y"}]
    p = tmp_path / "r.csv"
    write_rows_csv(p, rows)
    back = read_rows_csv(p)
    assert float(back[0]["a"]) == 1 / 3
    assert float(back[1]["a"]) == 2.0 ** -52


def test_load_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"schema_version": 99, "pipeline": "cell_relaxation"}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"schema_version": 1, "pipeline": "mystery"}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"schema_version": 1, "pipeline": "cell_relaxation",
                             "kinetic": {"xi_max": 0.5, "support_bound": 0.9}}))
    with pytest.raises(ConfigError, match="L > M"):
        load_config(p)


def test_run_experiment_bad_config_exit2_with_manifest(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"schema_version": 1, "pipeline": "nope"}))
    out = tmp_path / "out"
    code = run_experiment(cfg, out)
    assert code == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "fail" and "pipeline" in manifest["error"]


def test_cell_relaxation_pipeline_deterministic(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "schema_version": 1, "pipeline": "cell_relaxation", "seed": 3,
        "flux": {"name": "hamiltonian"},
        "params": {"family": "hamiltonian", "y_cells": 16, "pseudo_t": 20.0},
    }))
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        assert run_experiment(cfg, out) == 0
        outs.append((out / "cell_relaxation.csv").read_bytes())
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "pass"
        assert manifest["seed"] == 3
    assert outs[0] == outs[1]  # bit-identical CSV for same config + seed


def test_multiplier_pipeline_through_main(tmp_path):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({
        "schema_version": 1, "pipeline": "multiplier_sign", "seed": 1,
        "flux": {"name": "shear"},
        "params": {"x_cells": 32, "t_end": 0.2, "n_probes": 20},
    }))
    out = tmp_path / "out_m"
    proc = subprocess.run([sys.executable, "-m", "oscillab.cli", "run",
                           "--config", str(cfg), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rows = read_rows_csv(out / "multiplier_sign.csv")
    assert len(rows) == 1 * 20 or len(rows) == 10 * 20


def test_validate_subcommand(tmp_path):
    cfg = tmp_path / "v.json"
    cfg.write_text(json.dumps({"schema_version": 1, "pipeline": "cell_relaxation"}))
    proc = subprocess.run([sys.executable, "-m", "oscillab.cli", "validate",
                           "--config", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0
    cfg.write_text("{}")
    proc = subprocess.run([sys.executable, "-m", "oscillab.cli", "validate",
                           "--config", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 2


def test_list_catalog_contents():
    text = list_catalog()
    for name in ("shear", "hamiltonian", "separate_burgers", "hetero_1d",
                 "homogeneous_burgers"):
        assert name in text
    data = json.loads(list_catalog(as_json=True))
    assert [f["name"] for f in data["fluxes"]] == [
        "shear", "hamiltonian", "separate_burgers", "hetero_1d", "homogeneous_burgers"]
    assert "direct_convergence" in data["pipelines"]


def test_unknown_subcommand_usage_exit2():
    proc = subprocess.run([sys.executable, "-m", "oscillab.cli", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 2


def test_cell_solution_binary_roundtrip(tmp_path):
    from oscillab.cells import load_cell_solution, save_cell_solution, stationary_family
    from oscillab.fluxes import builtin_flux
    model = builtin_flux("hamiltonian")
    g = Grid(y_cells=(24, 24), xi_cells=16, xi_max=1.5, support_bound=1.0)
    sol = stationary_family(model, "hamiltonian", g)
    p = tmp_path / "cell.field"
    save_cell_solution(p, sol)
    back = load_cell_solution(p, model)
    np.testing.assert_array_equal(back.v, sol.v)
    assert abs(back.residual_strong - sol.residual_strong) <= 1e-14


def test_direct_pipeline_field_dump_and_summary(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "schema_version": 1, "pipeline": "direct_convergence", "seed": 0,
        "flux": {"name": "shear"},
        "params": {"eps": [0.25], "delta": [0.25], "cells_per_eps": 8,
                   "t_end": 0.1, "out_times": 3, "save_fields": True,
                   "reference_x_cells": 64, "reference_y2_cells": 16},
    }))
    out = tmp_path / "o"
    run_experiment(cfg, out)  # single-eps run cannot pass the decrease check
    from oscillab.fieldio import read_field
    fields = sorted(out.glob("direct_eps_*.field"))
    assert len(fields) == 3
    f = read_field(fields[0])
    assert f.grid.epsilon == 0.25
    rows = read_rows_csv(out / "summary.csv")
    assert {"eps", "time", "mass", "sup"} <= set(rows[0].keys())
