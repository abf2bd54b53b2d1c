import json

import pytest

from app.api.commands.study import parse_levels
from app.core.exceptions import ScenarioConfigError
from main import main


def write_scenario(tmp_path, text, name="scenario.env"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_catalog(capsys):
    assert main(["catalog"]) == 0
    out = capsys.readouterr().out
    assert "holomorphic_graph" in out
    assert "clifford_patch" in out


def test_catalog_json(capsys):
    assert main(["catalog", "--json"]) == 0
    listing = json.loads(capsys.readouterr().out)
    assert {entry["name"] for entry in listing} >= {"plane", "holomorphic_graph"}


def test_run_passes(tmp_path, output_dir, capsys):
    config = write_scenario(tmp_path, "\n".join([
        "SURFACE=plane",
        "N_R=16",
        "N_THETA=32",
        "ROUTE=neumann",
        "TWIST=linear",
        "TWIST_A=1.0",
        "CHECKS=ricci,weingarten",
    ]))
    assert main(["run", config]) == 0
    out = capsys.readouterr().out
    assert "PASS  ricci" in out
    assert "total torsion" in out
    assert (output_dir / "report.json").is_file()
    assert (output_dir / "scenario.env").read_text().startswith("SURFACE=plane")


def test_run_reports_failed_check(tmp_path, output_dir, capsys):
    config = write_scenario(tmp_path, "SURFACE=holomorphic_graph\nN_R=16\nN_THETA=32\nCHECKS=ricci\nTOLERANCE_CONSTANT=1e-12\n")
    assert main(["run", config]) == 1
    assert "FAIL  ricci" in capsys.readouterr().out


@pytest.mark.parametrize("text", [
    "SURFACE=holomorphic_graph_embedded\nROUTE=neumann\n",
    "SURFACE=plane\nSPEED=3\n",
])
def test_run_configuration_error(tmp_path, output_dir, capsys, text):
    assert main(["run", write_scenario(tmp_path, text)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_run_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.env")]) == 2
    assert "not found" in capsys.readouterr().err


def test_run_stage_error(tmp_path, output_dir, capsys):
    config = write_scenario(tmp_path, "SURFACE=plane\nSURFACE_ASPECT=2.0\nN_R=16\nN_THETA=32\n")
    assert main(["run", config]) == 2
    assert "stage 'sample' failed" in capsys.readouterr().err


@pytest.mark.parametrize("levels", ["16x32,32x64", "16x32,32x64,64", "16x32,32x64,64x100"])
def test_study_bad_levels(tmp_path, output_dir, capsys, levels):
    config = write_scenario(tmp_path, "SURFACE=plane\n")
    assert main(["study", config, "--levels", levels]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_study_prints_table(tmp_path, output_dir, capsys):
    config = write_scenario(tmp_path, "SURFACE=holomorphic_graph\nROUTE=neumann\n")
    assert main(["study", config, "--levels", "8x16,16x32,32x64"]) == 0
    out = capsys.readouterr().out
    assert "reference total torsion" in out
    assert "(analytic)" in out
    assert (output_dir / "study.csv").is_file()


def test_parse_levels():
    assert parse_levels("16x32, 32X64,") == [(16, 32), (32, 64)]
    with pytest.raises(ScenarioConfigError):
        parse_levels("16by32")
