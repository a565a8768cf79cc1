import io
import json

import pytest

from legendrian.cli import EXIT_CHECK, EXIT_INPUT, EXIT_OK, RunConfig, ConfigError, build_parser, main, read_config


def run(args, tmp_path=None):
    out = io.StringIO()
    code = main([str(a) for a in args], stream=out)
    return code, out.getvalue()


def test_every_subcommand_is_registered():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {"torus", "surface", "spectrum", "table", "verify"}


def test_torus_writes_mesh_and_report(tmp_path):
    mesh, rep = tmp_path / "torus.ply", tmp_path / "torus.json"
    code, out = run(["torus", "--m-bar", 3, "--grid", "128x1408", "--out", mesh, "--json", rep])
    assert code == EXIT_OK
    assert "special_legendrian: pass" in out
    r = json.loads(rep.read_text())
    assert r["special_legendrian"] == "pass" and r["closes"]
    assert r["grid"] == [128, 1408]
    assert r["legendrian_defect"] < 1e-8 and r["lagrangian_angle_sup"] < 1e-8
    head = mesh.read_bytes()[:200].decode("ascii", "replace")
    assert "element vertex 180224" in head and "element face 360448" in head


def test_torus_obj(tmp_path):
    path = tmp_path / "t.obj"
    assert run(["torus", "--grid", "8x44", "--out", path])[0] == EXIT_OK
    lines = path.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 8 * 44
    assert sum(l.startswith("f ") for l in lines) == 2 * 8 * 44


@pytest.mark.parametrize("args", [["torus", "--m-bar", 1], ["torus", "--tau", 0.5], ["torus", "--grid", "12by4"],
                                  ["surface", "--genus", 4], ["table", "--taus", "0.3"],
                                  ["verify", "--suite", "12"], ["nonsense"]])
def test_input_errors(args, capsys):
    code, _ = run(args)
    assert code == EXIT_INPUT


def test_even_genus_message(capsys):
    run(["surface", "--genus", 4, "--m-bar", 3, "--zeta", "0,0"])
    assert "even genus unsupported" in capsys.readouterr().err


def test_surface(tmp_path):
    mesh, rep, angles = tmp_path / "s.ply", tmp_path / "s.json", tmp_path / "a.csv"
    code, out = run(["surface", "--genus", 3, "--m-bar", 3, "--zeta", "0,0", "--n-s", 16,
                     "--out", mesh, "--json", rep, "--csv", angles])
    assert code == EXIT_OK
    r = json.loads(rep.read_text())
    assert r["euler_characteristic"] == -4
    assert r["legendrian_defect"] < 1e-7
    assert r["theta_outside_mass"] < 1e-9
    assert angles.read_text().splitlines()[0] == "s,t,theta,theta_gluing,theta_dislocation,theta_twisting"


def test_surface_layout_error(capsys):
    # b beyond the half period cannot hold the spherical region
    code, _ = run(["surface", "--b", 5.0])
    assert code == 3


def test_table_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["table", "--kind", "rotation", "--out", p])[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0].startswith("tau,p_hat_heuman,p_hat_phase")
    assert len(rows) == 21


@pytest.mark.parametrize("kind,column", [("period", "p_plus_half_log_tau"), ("neck", "y_min_over_two_tau")])
def test_table_kinds(kind, column):
    code, out = run(["table", "--kind", kind, "--taus", "0.01,0.001"])
    assert code == EXIT_OK
    head, *rows = out.splitlines()
    assert column in head.split(",") and len(rows) == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for the table\nkind = neck\ntaus = 0.01,0.001\ncount = 3\n")
    code, out = run(["table", "--config", cfg])
    assert out.splitlines()[0].startswith("tau,y_min") and len(out.splitlines()) == 3
    # flags win over the file
    code, out = run(["table", "--config", cfg, "--kind", "period"])
    assert out.splitlines()[0].startswith("tau,p_tau")
    assert len(out.splitlines()) == 3


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run(["table", "--config", bad])[0] == EXIT_INPUT
    bad.write_text("just words\n")
    with pytest.raises(ConfigError):
        read_config(bad)
    bad.write_text("kind = cubic\n")
    assert run(["table", "--config", bad])[0] == EXIT_INPUT


def test_run_config_validation():
    RunConfig("torus").validate()
    for kw in ({"m_bar": 1}, {"genus": 2}, {"genus": 1}, {"tol": 0.0}, {"grid": (1, 5)}):
        with pytest.raises(ConfigError):
            RunConfig("torus", **kw).validate()


def test_spectrum_neck_and_sphere(tmp_path):
    rep = tmp_path / "s.json"
    code, out = run(["spectrum", "--suite", "neck", "--json", rep])
    assert code == EXIT_OK and "neck b=2" in out
    r = json.loads(rep.read_text())
    assert [row["b"] for row in r["neck"]["rows"]] == [1.5, 2.0, 2.5]
    code, out = run(["spectrum", "--suite", "sphere", "--h", 0.1, "--format", "json"])
    assert json.loads(out)["sphere"]["cluster_error"] < 0.05


def test_spectrum_kernel_triplets(tmp_path):
    prefix = tmp_path / "op"
    code, out = run(["spectrum", "--suite", "kernel", "--n-s", 32, "--triplets", prefix])
    assert code == EXIT_OK
    assert "S~[1]" in out
    first = (tmp_path / "op_stiffness.txt").read_text().splitlines()[0]
    assert first.startswith("% 29636 29636 ")


def test_verify_exit_codes_and_json(tmp_path):
    rep = tmp_path / "v.json"
    code, out = run(["verify", "--suite", "1,2,4", "--json", rep])
    assert code == 0
    assert out.count("PASS") == 3
    r = json.loads(rep.read_text())
    assert [c["criterion"] for c in r["criteria"]] == [1, 2, 4]
    assert all(c["passed"] for c in r["criteria"])
    # a single failed criterion gives exit code 1
    code, out = run(["verify", "--suite", "5"])
    assert code == EXIT_CHECK and "FAIL" in out


def test_verify_json_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        run(["verify", "--suite", "6", "--json", p])
    assert a.read_bytes() == b.read_bytes()
    assert "seconds" not in json.loads(a.read_text())["criteria"][0]
    run(["verify", "--suite", "6", "--json", a, "--timings"])
    assert "seconds" in json.loads(a.read_text())["criteria"][0]


def test_torus_report_is_deterministic(tmp_path):
    reps = [tmp_path / "a.json", tmp_path / "b.json"]
    for r in reps:
        run(["torus", "--grid", "16x88", "--out", tmp_path / "t.obj", "--json", r])
    assert reps[0].read_bytes() == reps[1].read_bytes()
