import math
from pathlib import Path

import numpy as np
import pytest

from insfem.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, main
from insfem.output import nodal_field
from insfem.presets import cavity_input, cone_input, run_case_axisymmetric_cone, run_case_lid_cavity
from insfem.verify.study import _mirror_index

INPUTS = Path(__file__).resolve().parents[1] / "inputs"


def small_cavity(tmp_path, name="cavity_small", **kw):
    path = tmp_path / f"{name}.i"
    path.write_text(cavity_input(Re=100.0, n=4, num_steps=3, basename=name, interval=2, **kw))
    return path


def test_run_writes_vtk_and_csv(tmp_path, capsys):
    path = small_cavity(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(path), "--output-dir", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["cavity_small.csv", "cavity_small_0002.vtk",
                                                     "cavity_small_0003.vtk"]
    rows = (out / "cavity_small.csv").read_text().splitlines()
    assert rows[0] == "time,max_u,min_u" and len(rows) == 4
    assert "max_u" in capsys.readouterr().out


def test_run_is_reproducible(tmp_path):
    path = small_cavity(tmp_path)
    for d in ("a", "b"):
        assert main(["run", str(path), "--output-dir", str(tmp_path / d)]) == EXIT_OK
    assert (tmp_path / "a" / "cavity_small.csv").read_bytes() == (tmp_path / "b" / "cavity_small.csv").read_bytes()


def test_shipped_creeping_cone_input(tmp_path):
    assert main(["run", str(INPUTS / "cone_creeping.i"), "--output-dir", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "cone_re0.5.csv").exists()
    assert list(tmp_path.glob("cone_re0.5_*.vtk"))


def test_missing_file_is_input_error(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.i")]) == EXIT_INPUT
    assert "missing.i" in capsys.readouterr().err


def test_bad_input_names_file_and_line(tmp_path, capsys):
    path = tmp_path / "bad.i"
    path.write_text(cavity_input(n=4).replace("nl_max_its = 15", "nl_max_its = many"))
    assert main(["run", str(path)]) == EXIT_INPUT
    err = capsys.readouterr().err
    line = cavity_input(n=4).splitlines().index("  nl_max_its = 15") + 1
    assert f"bad.i:{line}:" in err and "nl_max_its" in err


def test_unknown_boundary_is_input_error(tmp_path, capsys):
    path = tmp_path / "bad.i"
    path.write_text(cavity_input(n=4).replace("boundary = top", "boundary = lid_side"))
    assert main(["run", str(path)]) == EXIT_INPUT
    assert "lid_side" in capsys.readouterr().err


def test_solver_divergence_exit_code(tmp_path, capsys):
    path = tmp_path / "div.i"
    text = cavity_input(Re=1000.0, n=4, num_steps=3, basename="div")
    path.write_text(text.replace("nl_max_its = 15", "nl_max_its = 1").replace("dtmin = 1e-5", "dtmin = 0.009"))
    assert main(["run", str(path), "--output-dir", str(tmp_path)]) == EXIT_SOLVER
    assert "solve failed" in capsys.readouterr().err


def test_verify_unknown_suite():
    assert main(["verify", "nonsense"]) == EXIT_INPUT


def test_usage_errors():
    assert main([]) == EXIT_INPUT
    assert main(["study", "mms", "--element", "q3q3"]) == EXIT_INPUT
    assert main(["study", "mms", "--levels", "1"]) == EXIT_INPUT
    assert main(["study", "unknown_case"]) == EXIT_INPUT


def test_study_prints_table(capsys):
    assert main(["study", "mms", "--levels", "2", "--base", "4", "--element", "q2q1"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "h,l2_u,h1_u,l2_p"
    assert lines[-1].startswith("slope,")


# presets


def test_small_cavity_properties():
    _, res = run_case_lid_cavity(100.0, 16, num_steps=100, dt=0.1)
    s = res.system
    assert res.run.steady_state
    speed = np.hypot(nodal_field(s, res.y, "vel_x"), nodal_field(s, res.y, "vel_y"))
    top = np.isclose(s.mesh.nodes[:, 1], 1.0)
    assert speed[top].max() <= 1.0 + 1e-6 and speed[~top].max() < 1.0
    assert res.y[s.dofmap.node_dofs["p"][s.mesh.find_node((0.0, 0.0))]] == 0.0


def test_stokes_cavity_is_mirror_symmetric():
    _, res = run_case_lid_cavity(1.0, 8, stokes=True)
    u = nodal_field(res.system, res.y, "vel_x")
    assert np.max(np.abs(u - u[_mirror_index(res.system.mesh.nodes)])) <= 1e-10


def test_creeping_cone_conserves_mass():
    _, res = run_case_axisymmetric_cone(0.5, nr=4, nz_cone=4, nz_pipe=8)
    q_in, q_out = res.last("flow_in"), res.last("flow_out")
    assert q_in == pytest.approx(-math.pi / 8, abs=1e-12)
    assert abs(q_in + q_out) <= 1e-8 * abs(q_in)
    assert res.last("min_uz") >= -1e-8


def test_cone_presets_switch_discretization():
    assert "elem_type = TRI6" in cone_input(0.5) and "type = Steady" in cone_input(0.5)
    adv = cone_input(1000.0)
    assert "elem_type = TRI3" in adv and "type = Transient" in adv and "supg = true" in adv


def test_shipped_inputs_match_presets():
    assert (INPUTS / "cavity_re1000.i").read_text() == cavity_input(1000.0, 64)
    assert (INPUTS / "cone_creeping.i").read_text() == cone_input(0.5)
