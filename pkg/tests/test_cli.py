import numpy as np
import pytest

from torus_waves.cli import main
from torus_waves.config import loads
from torus_waves.operators import OperatorSpec
from torus_waves.outputs import read_csv, verify_manifest
from torus_waves.spectral_grid import Grid, read_grid_dump


def write_config(tmp_path, body, name="run.toml"):
    p = tmp_path / name
    p.write_text(body)
    return str(p)


EVOLVE = """\
[grid]
N = 16
[operator]
r = 2.0
beta = "cos(x1)"
omega0 = 0.1
[evolution]
dt = 0.25
T = 2.0
forcing = "f4"
snapshot_times = [1.0, 2.0]
red_s_list = [0.0, -0.5]
[output]
emit_plots_script = true
"""


def test_evolve_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["evolve", "--config", write_config(tmp_path, EVOLVE), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    for expected in ("energy.csv", "growth_fit.csv", "snapshot_0.bin", "snapshot_1.bin",
                     "snapshots.csv", "red.csv", "red_slopes.csv", "peak.csv", "plot.py",
                     "resolved_config.toml", "MANIFEST.sha256"):
        assert expected in names
    energy = read_csv(out / "energy.csv")
    assert len(energy) == 9 and float(energy[-1]["t"]) == 2.0
    g, vals = read_grid_dump(out / "snapshot_1.bin")
    assert g == Grid(16) and vals.shape == (16, 16)
    assert verify_manifest(out)
    resolved = loads((out / "resolved_config.toml").read_text())
    assert resolved.evolution.T == 2.0 and resolved.evolution.forcing.startswith("-5*exp")


def test_repeated_runs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, EVOLVE)
    for d in ("a", "b"):
        assert main(["evolve", "--config", cfg, "--out", str(tmp_path / d), "--threads", "1"]) == 0
    assert (tmp_path / "a" / "MANIFEST.sha256").read_bytes() == \
        (tmp_path / "b" / "MANIFEST.sha256").read_bytes()


def test_eig_without_potential_lists_sorted_multipliers(tmp_path):
    body = """\
[grid]
N = 8
[operator]
r = 0.0
beta = "cos(x1)"
nu = 0.01
[eig]
m = 6
method = "dense"
"""
    out = tmp_path / "o"
    assert main(["eig", "--config", write_config(tmp_path, body), "--out", str(out)]) == 0
    rows = read_csv(out / "eigenvalues.csv")
    got = np.array([complex(float(r["re_lambda"]), float(r["im_lambda"])) for r in rows])
    mult = OperatorSpec(Grid(8), 0.0, "cos(x1)", nu=0.01).multiplier_values.ravel()
    expected = np.sort(np.abs(mult))[:6]
    assert np.allclose(np.sort(np.abs(got)), expected, atol=1e-14)
    for z in got:
        assert np.min(np.abs(mult - z)) <= 1e-14
    assert len([p for p in out.iterdir() if p.name.startswith("mode_")]) == 6


def test_sweep_outputs(tmp_path):
    body = """\
[grid]
N = 8
[operator]
r = 0.5
beta = "cos(x1)"
[eig]
m = 4
method = "dense"
nu_list = "1e-2:5e-3:3"
ordering = "continuity"
"""
    out = tmp_path / "o"
    assert main(["sweep", "--config", write_config(tmp_path, body), "--out", str(out)]) == 0
    traj = read_csv(out / "trajectories.csv")
    assert list(traj[0]) == ["traj_id", "nu", "re_lambda", "im_lambda", "residual"]
    assert len(traj) == 12
    sym = read_csv(out / "symmetry.csv")
    assert list(sym[0]) == ["lambda_re", "lambda_im", "partner_re", "partner_im", "distance", "kind"]
    assert all(r["kind"] in ("pair", "self") for r in sym)
    assert (out / "mode_red.csv").exists() and (out / "smoothness.csv").exists()


def test_manifold_reports_holes_for_test3(tmp_path):
    body = """\
[grid]
N = 16
[operator]
r = 0.55
beta = "cos(x1 - 2*x2) + sin(2*x2)"
[manifold]
resolution = 64
"""
    out = tmp_path / "o"
    assert main(["manifold", "--config", write_config(tmp_path, body), "--out", str(out)]) == 0
    frac = float(read_csv(out / "coverage.csv")[0]["fraction"])
    assert frac < 1
    rows = read_csv(out / "manifold.csv")
    assert len(rows) == 64 * 64
    assert any(r["eta_sheet1"] == "" for r in rows)


def test_flow_outputs(tmp_path):
    body = """\
[grid]
N = 16
[operator]
r = 0.5
beta = "cos(x1)"
[flow]
variant = "hamiltonian"
points = [[0.5, 0.0, -1.0, 0.3]]
random_points = 2
dt = 0.01
T = 1.0
record_every = 10
"""
    out = tmp_path / "o"
    assert main(["flow", "--config", write_config(tmp_path, body), "--out", str(out)]) == 0
    for k in range(3):
        rows = read_csv(out / f"flow_{k}.csv")
        assert len(rows) == 11 and list(rows[0]) == ["t", "x1", "x2", "xi1", "xi2"]


def test_convergence_time_outputs(tmp_path):
    body = """\
[grid]
N = 16
[operator]
r = 2.0
beta = "cos(x1)"
omega0 = 0.1
[evolution]
forcing = "f4"
[convergence]
kind = "time"
dt_list = [0.5, 0.25, 0.125]
reference_dt = 0.0078125
T = 1.0
"""
    out = tmp_path / "o"
    assert main(["convergence", "--config", write_config(tmp_path, body), "--out", str(out)]) == 0
    orders = {r["scheme"]: float(r["fitted_order"]) for r in read_csv(out / "orders_time.csv")}
    assert set(orders) == {"rk4", "etdrk4"}
    assert all(3.5 <= v <= 4.5 for v in orders.values())


def test_output_directory_precedence(tmp_path, monkeypatch):
    body = EVOLVE.replace("emit_plots_script = true", f'directory = "{tmp_path / "cfg"}"')
    cfg = write_config(tmp_path, body)
    monkeypatch.chdir(tmp_path)
    assert main(["evolve", "--config", cfg]) == 0
    assert (tmp_path / "cfg" / "energy.csv").exists()
    monkeypatch.setenv("TORUS_WAVES_OUT", str(tmp_path / "env"))
    assert main(["evolve", "--config", cfg]) == 0
    assert (tmp_path / "env" / "energy.csv").exists()
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "energy.csv").exists()


@pytest.mark.parametrize("body, code", [
    ("[grid]\nN = 16\n", 2),
    ('[grid]\nN = 16\n[operator]\nr = 0.5\nbeta = "cos(x3)"\n', 2),
    ('[grid]\nN = 16\n[operator]\nr = 0.5\nbeta = "cos(x1)"\n', 2),  # evolve needs a forcing
    ('[grid]\nN = 8\n[operator]\nr = 5.0\nbeta = "cos(x1)"\n[evolution]\nscheme = "rk4"\n'
     'dt = 2.7\nT = 8100.0\nforcing = "1"\n', 3),
])
def test_exit_codes(tmp_path, body, code, capsys):
    assert main(["evolve", "--config", write_config(tmp_path, body), "--out",
                 str(tmp_path / "o")]) == code
    assert capsys.readouterr().err


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["evolve", "--config", str(tmp_path / "none.toml")]) == 4


def test_bad_thread_count(tmp_path):
    assert main(["evolve", "--config", write_config(tmp_path, EVOLVE), "--threads", "0"]) == 2
