import csv
import io

import pytest

from milnorlab.cli import ConfigError, RunConfig, main
from milnorlab.presets import preset_names

PLANE_DOC = '''
[family]
name = "my-plane"
flags = holomorphic, minimal, embedded
s_schedule = 1e-2, 2.5e-3
eps_schedule = 0.2, 0.1

[chart "plane"]
domain = disc(1)
map_c = (z, 0)

[branch]
branches = (N=1, s=1)
'''


def test_list_presets_csv(capsys):
    assert main(["list-presets", "--csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["name"] for r in rows] == list(preset_names())
    node = rows[[r["name"] for r in rows].index("NODE")]
    assert (node["muT"], node["muN"], node["chi"]) == ("2", "-2", "0")


def test_list_presets_table(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split()[0] == "name"
    assert all(n in out for n in preset_names())


def test_run_writes_report_and_table(tmp_path, capsys):
    out = tmp_path / "plane"
    assert main(["run", "--preset", "plane", "--analyses", "milnor,euler", "--out", str(out)]) == 0
    report = capsys.readouterr().out
    assert "[provenance]" in report and "[milnor]" in report and "[euler]" in report
    assert "status = pass" in report
    assert "convention.hopf_reference_sign = 1" in report
    assert (out / "report.txt").read_text() == report
    table = (out / "milnor_table.csv").read_text().splitlines()
    assert table[0] == "eps,s,lT,lT_err,lN,lN_err"


def test_runs_are_deterministic(capsys):
    main(["run", "--preset", "PLANE", "--analyses", "milnor"])
    first = capsys.readouterr().out
    main(["run", "--preset", "PLANE", "--analyses", "milnor"])
    assert capsys.readouterr().out == first


def test_run_family_file(tmp_path, capsys):
    path = tmp_path / "plane.fam"
    path.write_text(PLANE_DOC)
    assert main(["run", "--family", str(path), "--analyses", "milnor"]) == 0
    out = capsys.readouterr().out
    assert "family = my-plane" in out and "muT = 0" in out


def test_schedule_overrides(capsys):
    assert main(["run", "--preset", "PLANE", "--analyses", "euler", "--eps", "0.3,0.15", "--s", "1e-3"]) == 0
    out = capsys.readouterr().out
    assert "eps = 0.1500000000" in out and "s = 0.0010000000" in out


def test_syntax_error_in_family_file(tmp_path, capsys):
    path = tmp_path / "bad.fam"
    path.write_text(PLANE_DOC.replace("map_c = (z, 0)", "map_c = (z, (0)"))
    assert main(["run", "--family", str(path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error [germ]:")
    assert "line 10" in err and "expected ')'" in err


def test_missing_file(capsys):
    assert main(["run", "--family", "/nonexistent/x.fam"]) == 2
    assert "error [cli]" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["run", "--preset", "NOPE"],
    ["run", "--preset", "PLANE", "--eps", "-0.1"],
    ["run", "--preset", "PLANE", "--tol-rel", "0"],
])
def test_bad_configuration_exit_code(argv, capsys):
    assert main(argv) == 2
    assert "error [cli]" in capsys.readouterr().err


def test_unknown_analysis_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--preset", "PLANE", "--analyses", "milnor,magic"])
    assert exc.value.code == 2


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig()
    with pytest.raises(ConfigError):
        RunConfig(preset="PLANE", family_file="x")
    assert RunConfig(preset="plane").analyses[0] == "milnor"


def test_slice_export(tmp_path, capsys):
    path = tmp_path / "node.csv"
    assert main(["slice", "--preset", "NODE", "--s", "0", "--eps", "0.1", "--out", str(path)]) == 0
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert {r["component"] for r in rows} == {"0", "1"}
    assert "2 component(s)" in capsys.readouterr().out


@pytest.mark.slow
def test_failed_check_gives_exit_code_one(capsys):
    # a snap threshold far below the quadrature accuracy cannot be met
    assert main(["run", "--preset", "IMMCUSP", "--analyses", "milnor", "--snap", "1e-12"]) == 1
    out = capsys.readouterr().out
    assert "check.snap = FAIL" in out and "status = fail" in out
    assert "milnor.snap" in out.split("failed_checks = ")[1]
