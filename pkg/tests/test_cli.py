import subprocess
import sys

import pytest

from rlx import meshes
from rlx.cli import ConfigError, build_parser, main, read_config, resolve
from rlx.extraction import CSV_HEADER
from rlx.geometry import write_mesh


def test_mesh_check_strip(capsys):
    assert main(["mesh-check", "--mesh", "builtin:strip"]) == 0
    out = capsys.readouterr().out.split()
    assert out[:6] == ["N_p=2", "N_e=1", "N_l=1", "boundary_edges=6", "components=1", "ports=P1"]


def test_mesh_check_file_and_dumps(tmp_path, capsys):
    path = tmp_path / "c.msh"
    write_mesh(meshes.BUILTIN["coils-coarse"](), path)
    rc = main(["mesh-check", "--mesh", str(path), "--dump-mapping", str(tmp_path / "a.txt"),
               "--dump-loops", str(tmp_path / "l.txt"), "--null-check"])
    assert rc == 0
    assert "loop_map_min_singular=" in capsys.readouterr().out
    assert (tmp_path / "a.txt").read_text().startswith("A1 ")
    assert (tmp_path / "l.txt").read_text().strip()


def test_extract_csv(tmp_path):
    out, summ = tmp_path / "z.csv", tmp_path / "s.json"
    rc = main(["extract", "--mesh", "builtin:coils-coarse", "--fstart", "1e3", "--fstop", "1e9",
               "--npoints", "3", "--out", str(out), "--summary", str(summ)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 3 * 4
    assert '"all_converged": true' in summ.read_text()


def test_extract_non_convergence_exit_code(tmp_path):
    rc = main(["extract", "--mesh", "builtin:coils-coarse", "--npoints", "1", "--fstart", "1e9",
               "--precond", "none", "--max-iters", "2", "--out", str(tmp_path / "z.csv"),
               "--summary", str(tmp_path / "s")])
    assert rc == 3


def test_reference_csv(capsys):
    assert main(["reference", "--npoints", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("freq_hz") and len(lines) == 4
    assert float(lines[1].split(",")[1]) == pytest.approx(1.068e-2, rel=1e-3)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(meshes.BUILTIN) and "FAIL" not in out


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["extract", "--bogus"])
    assert exc.value.code == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nnpoints = 7\nfmm_order = 6\ndirect = yes\n")
    args = build_parser().parse_args(["extract", "--config", str(cfg), "--npoints", "9"])
    rc = resolve(args)
    assert rc["npoints"] == 9 and rc["fmm-order"] == 6 and rc["direct"] is True
    assert rc["restart"] == 50 and "restart" not in rc.explicit


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nope = 1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        read_config(bad)
    assert main(["extract", "--config", str(bad)]) == 2
    bad.write_text("npoints = many\n")
    with pytest.raises(ConfigError, match="bad value"):
        read_config(bad)


def test_runtime_errors_are_reported(capsys):
    assert main(["mesh-check", "--mesh", "builtin:nothing"]) == 1
    assert "rlx mesh-check: error:" in capsys.readouterr().err
    assert main(["extract"]) == 1


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "rlx.cli", "mesh-check", "--mesh", "builtin:plate"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "N_p=" in r.stdout
