import numpy as np
import pytest

from geobalance import assembly, cli
from geobalance.config import ConfigError, RunConfig, apply_overrides, canonical_key, parse_config
from geobalance.mesh import generate_square_mesh, load_mesh
from geobalance.spaces import make_pair
from geobalance.vtk import read_vtk, visualization_cells


def call(tmp_path, *argv):
    return cli.main([argv[0], "--output-dir", str(tmp_path), *argv[1:]])


def test_config_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    p = cfg.params()
    assert (p.f, p.g, p.Dbar, p.dt, p.nsteps) == (10.0, 1.0, 1.0, 0.01, 1000)
    assert cfg.mesh().n_triangles == 128


def test_config_parsing():
    cfg = parse_config("# comment\npair = P0-P1\nmesh-seed = 3   # trailing\nFR = 0.5\n\nf = 2\n")
    assert (cfg.pair, cfg.mesh_seed, cfg.Fr) == ("P0-P1", 3, 0.5)
    p = cfg.params()
    assert (p.f, p.g) == (2.0, 4.0)
    assert canonical_key("Output-Dir") == "output_dir"


@pytest.mark.parametrize("text,line", [
    ("n = 4\ndt = -1\n", 2),
    ("pair = P1DG-P2\ncolour = red\n", 2),
    ("nsteps = many\n", 1),
    ("n = 4\n\npair = Q9\n", 3),
    ("just words\n", 1),
])
def test_config_errors_have_line_numbers(text, line):
    with pytest.raises(ConfigError, match=f"line {line}"):
        parse_config(text)


def test_overrides():
    cfg = apply_overrides(RunConfig(), {"pair": "P2DG-P3", "nsteps": "5"})
    assert (cfg.pair, cfg.nsteps) == ("P2DG-P3", 5)
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {"perturb": "0.5"})


def test_mesh_gen_round_trip(tmp_path):
    out = tmp_path / "m.txt"
    assert call(tmp_path, "mesh-gen", "--n", "5", "--perturb", "0.3", "--mesh-seed", "2", "--out", str(out)) == 0
    m = load_mesh(out.read_text())
    ref = generate_square_mesh(5, 0.3, 2)
    assert np.array_equal(m.nodes, ref.nodes) and np.array_equal(m.triangles, ref.triangles)


def test_run_with_mesh_file_and_snapshots(tmp_path):
    mfile = tmp_path / "m.txt"
    cli.main(["mesh-gen", "--n", "3", "--out", str(mfile)])
    rc = call(tmp_path, "run", "--mesh-file", str(mfile), "--nsteps", "20", "--snapshot-interval", "10")
    assert rc == 0
    snaps = sorted(p.name for p in tmp_path.glob("snapshot_*.vtk"))
    assert snaps == ["snapshot_000000.vtk", "snapshot_000010.vtk", "snapshot_000020.vtk"]
    lines = (tmp_path / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "step,time,energy,div_inf,eta_drift,u_drift" and len(lines) == 21
    data = read_vtk((tmp_path / "snapshot_000000.vtk").read_text())
    pair = make_pair("P1DG-P2", load_mesh(mfile.read_text()))
    assert np.allclose(data["points"][:, :2], pair.H.dof_coords)
    assert len(data["eta"]) == pair.H.ndof
    assert len(data["cells"]) == pair.mesh.n_triangles * len(visualization_cells(2))
    assert data["u"].shape == (len(data["cells"]), 2)


def test_run_iterative_and_random(tmp_path):
    assert call(tmp_path, "run", "--n", "3", "--nsteps", "5", "--solver", "iterative", "--init", "random") == 0
    assert call(tmp_path, "run", "--n", "3", "--nsteps", "5", "--init", "standing-wave", "--f", "0") == 0


def test_balance_test_exit_codes(tmp_path):
    assert call(tmp_path, "balance-test", "--n", "4", "--nsteps", "100", "--seeds", "2") == 0
    text = (tmp_path / "balance_P1DG-P2.csv").read_text().splitlines()
    assert text[0] == "seed,eta_drift,u_drift,max_eta_drift,max_u_drift" and len(text) == 3
    # P1-P1 is a negative control: success means the balance visibly drifts
    assert call(tmp_path, "balance-test", "--pair", "P1-P1", "--n", "4", "--nsteps", "1000", "--seeds", "1") == 0


def test_balance_test_parallel_matches_serial(tmp_path):
    cfg = apply_overrides(RunConfig(), {"n": "3", "nsteps": "30"})
    assert cli.balance_test(cfg, [0, 1], jobs=2) == cli.balance_test(cfg, [0, 1], jobs=1)


def test_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert call(d, "balance-test", "--n", "3", "--nsteps", "50", "--seeds", "2", "--seed", "7") == 0
        assert call(d, "run", "--n", "3", "--nsteps", "10", "--seed", "7") == 0
    for name in ("balance_P1DG-P2.csv", "diagnostics.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_infsup_command(tmp_path, capsys):
    assert call(tmp_path, "infsup", "--pair", "P0-P1", "--ns", "2,4") == 0
    assert "max/min beta_h" in capsys.readouterr().out
    assert len((tmp_path / "infsup_P0-P1.csv").read_text().splitlines()) == 3
    assert call(tmp_path, "infsup", "--pair", "P1-P1", "--ns", "2,4") == 0


def test_poisson_command(tmp_path):
    assert call(tmp_path, "poisson-check", "--pair", "P2DG-P3", "--n", "4") == 0
    assert call(tmp_path, "poisson-check", "--pair", "P1-P1", "--n", "4", "--perturb", "0") == 0


def test_spectrum_command(tmp_path):
    assert call(tmp_path, "spectrum", "--n", "3") == 0
    assert (tmp_path / "spectrum_P1DG-P2.csv").exists()


def test_converge_command(tmp_path):
    assert call(tmp_path, "converge", "--pair", "P0-P1", "--ns", "4,8", "--T", "0.1", "--perturb", "0") == 0
    assert call(tmp_path, "converge", "--pair", "P0-P1", "--ns", "4,8", "--T", "0.1", "--min-order", "10") == 1


def test_export_ops(tmp_path):
    assert call(tmp_path, "export-ops", "--n", "2", "--ops", "G,K") == 0
    pair = make_pair("P1DG-P2", generate_square_mesh(2, 0.2, 0))
    ops = assembly.assemble(pair)
    for name in ("G", "K"):
        back = assembly.read_matrix_market(str(tmp_path / f"{name}.mtx"))
        assert abs(back.matrix - getattr(ops, name).matrix).max() == 0.0
    assert call(tmp_path, "export-ops", "--n", "2", "--ops", "Q") == 2


def test_usage_errors(tmp_path, capsys):
    assert call(tmp_path, "run", "--config", str(tmp_path / "missing.cfg")) == 2
    assert call(tmp_path, "run", "--dt", "-1") == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("n = 4\ndt = -1\n")
    assert call(tmp_path, "run", "--config", str(bad)) == 2
    assert "line 2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
