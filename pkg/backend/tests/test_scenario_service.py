import json
import math

import pandas as pd
import pytest

from app.core.exceptions import PipelineStageError, ScenarioConfigError
from app.schemas.scenario import RouteChoice, ScenarioConfig, TwistKind
from app.services.scenario_service import ScenarioService, observed_order

HOLOMORPHIC_TOTAL_TORSION = 2.0 * math.pi * (math.log(2.0) - 0.5)

PLANE_TWIST = {
    "SURFACE": "plane",
    "SURFACE_CODIMENSION": "2",
    "N_R": "32",
    "N_THETA": "64",
    "ROUTE": "both",
    "TWIST": "linear",
    "TWIST_A": "1.0",
    "CHECKS": "ricci,weingarten",
    "TOLERANCE_ROUTE": "1e-2",
    "RANDOM_SEED": "7",
}


def test_from_flat_parses_sections():
    cfg = ScenarioConfig.from_flat(PLANE_TWIST)
    assert cfg.route == RouteChoice.BOTH
    assert cfg.twist.kind == TwistKind.LINEAR
    assert cfg.twist.a == 1.0
    assert cfg.checks == ["ricci", "weingarten"]
    assert cfg.tolerances.route == 1e-2
    assert cfg.descent.seed == 7
    assert cfg.surface_params() == {"codimension": 2}


def test_config_echo_reproduces_scenario():
    cfg = ScenarioConfig.from_flat(PLANE_TWIST)
    echoed = ScenarioConfig.from_flat(cfg.to_flat())
    assert echoed.model_dump() == cfg.model_dump()


def test_from_env_file(tmp_path):
    path = tmp_path / "scenario.env"
    path.write_text("# comment\nSURFACE=holomorphic_graph\nN_R=16\nN_THETA=32\nCHECKS=ricci, tau\n")
    cfg = ScenarioConfig.from_env_file(path)
    assert (cfg.n_r, cfg.n_theta) == (16, 32)
    assert cfg.checks == ["ricci", "tau"]
    with pytest.raises(ScenarioConfigError):
        ScenarioConfig.from_env_file(tmp_path / "missing.env")


@pytest.mark.parametrize("values", [
    {"SURFACE": "plane", "COLOUR": "blue"},
    {"N_R": "32"},
    {"SURFACE": "plane", "CHECKS": "ricci,curl"},
    {"SURFACE": "holomorphic_graph_embedded", "ROUTE": "neumann"},
    {"SURFACE": "holomorphic_graph", "TWIST": "linear", "TWIST_PLANE": "1,3"},
    {"SURFACE": "nonsense"},
    {"SURFACE": "plane", "N_R": ""},
])
def test_invalid_scenarios(values):
    with pytest.raises(ScenarioConfigError):
        ScenarioConfig.from_flat(values)


def test_observed_order():
    assert observed_order(4e-2, 1e-2) == pytest.approx(2.0)
    assert observed_order(1e-2, 0.0) is None
    assert observed_order(None, 1e-2) is None


def test_plane_twist_scenario(output_dir):
    cfg = ScenarioConfig.from_flat(PLANE_TWIST)
    report = ScenarioService().run_scenario(cfg)

    assert report.total_torsion_initial == pytest.approx(2.0 * math.pi, rel=1e-2)
    assert report.total_torsion_final <= 1e-3
    assert set(report.routes) == {"neumann", "descent"}
    assert report.route_agreement.agree
    assert set(report.checks) == {"ricci", "weingarten"}
    assert report.passed

    saved = json.loads((output_dir / "report.json").read_text())
    assert saved["schema_version"] == report.schema_version
    assert saved["config"]["ROUTE"] == "both"
    assert (output_dir / report.history_file).is_file()
    history = pd.read_csv(output_dir / "history.csv")
    assert list(history.columns) == ["iteration", "total_torsion", "el_interior", "el_boundary", "step"]

    seed = pd.read_csv(output_dir / "fields" / "seed_torsion.csv")
    assert list(seed.columns[:5]) == ["node_index", "r", "theta", "u", "v"]
    assert "t1_12" in seed.columns
    assert len(seed) == 32 * 64 + 1
    assert "fields/rotation_angle_neumann.csv" in report.field_files


def test_report_is_deterministic(output_dir):
    cfg = ScenarioConfig.from_flat({**PLANE_TWIST, "N_R": "16", "N_THETA": "32", "CHECKS": "invariance"})
    first = ScenarioService().run_scenario(cfg, write=False)
    second = ScenarioService().run_scenario(cfg, write=False)
    assert first.checks["invariance"].residuals == second.checks["invariance"].residuals
    assert first.total_torsion_final == second.total_torsion_final


def test_holomorphic_graph_all_checks(output_dir):
    cfg = ScenarioConfig.from_flat({
        "SURFACE": "holomorphic_graph",
        "ROUTE": "both",
        "CHECKS": "ricci,weingarten,tau,invariance,apriori,coulomb",
        "RANDOM_SEED": "1",
    })
    report = ScenarioService().run_scenario(cfg)
    failed = {name: check.residuals for name, check in report.checks.items() if not check.passed}
    assert not failed
    assert report.apriori.lhs == 0.0
    assert report.checks["tau"].residuals["boundary"] == 0.0
    assert report.total_torsion_final == pytest.approx(HOLOMORPHIC_TOTAL_TORSION, rel=2e-2)
    assert report.metric_form_gap <= 1e-10
    assert (output_dir / "fields" / "tau.csv").is_file()


def test_failed_check_reported(output_dir):
    cfg = ScenarioConfig.from_flat({
        "SURFACE": "holomorphic_graph",
        "N_R": "16",
        "N_THETA": "32",
        "CHECKS": "ricci",
        "TOLERANCE_CONSTANT": "1e-12",
    })
    report = ScenarioService().run_scenario(cfg, write=False)
    assert not report.checks["ricci"].passed
    assert not report.passed


def test_stage_name_on_pipeline_error(output_dir):
    cfg = ScenarioConfig.from_flat({"SURFACE": "plane", "SURFACE_ASPECT": "2.0", "N_R": "16", "N_THETA": "32"})
    with pytest.raises(PipelineStageError) as info:
        ScenarioService().run_scenario(cfg)
    assert info.value.stage == "sample"
    assert "sample" in str(info.value)


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv("FRAME_LAB_OUTPUT_DIR", raising=False)
    cfg = ScenarioConfig.from_flat({"SURFACE": "plane", "OUTPUT_DIR": str(tmp_path / "from_file")})
    assert ScenarioService().resolve_output_dir(cfg) == tmp_path / "from_file"
    assert ScenarioService(tmp_path / "explicit").resolve_output_dir(cfg) == tmp_path / "explicit"
    monkeypatch.setenv("FRAME_LAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert ScenarioService(tmp_path / "explicit").resolve_output_dir(cfg) == tmp_path / "env"


@pytest.mark.parametrize("levels", [
    [(16, 32), (32, 64)],
    [(16, 32), (32, 64), (48, 128)],
])
def test_study_rejects_bad_levels(levels):
    cfg = ScenarioConfig.from_flat({"SURFACE": "plane"})
    with pytest.raises(ScenarioConfigError):
        ScenarioService().convergence_study(cfg, levels)


@pytest.mark.slow
def test_holomorphic_graph_convergence_study(output_dir):
    cfg = ScenarioConfig.from_flat({"SURFACE": "holomorphic_graph", "ROUTE": "neumann"})
    study = ScenarioService().convergence_study(cfg, [(16, 32), (32, 64), (64, 128)])

    assert study.reference_kind == "analytic"
    assert study.reference_total_torsion == pytest.approx(HOLOMORPHIC_TOTAL_TORSION)
    assert study.rows[0].torsion_order is None
    assert study.rows[-1].torsion_order >= 1.8
    assert study.rows[-1].ricci_order >= 1.8
    assert study.rows[-1].total_torsion == pytest.approx(HOLOMORPHIC_TOTAL_TORSION, rel=1e-2)
    assert (output_dir / "study.csv").is_file()


def test_twisted_plane_study_has_no_order(output_dir):
    cfg = ScenarioConfig.from_flat({
        "SURFACE": "plane", "ROUTE": "neumann", "TWIST": "linear", "TWIST_A": "1.0",
    })
    study = ScenarioService().convergence_study(cfg, [(8, 16), (16, 32), (32, 64)], write=False)
    assert all(row.total_torsion <= 1e-3 for row in study.rows[1:])
    assert study.reference_total_torsion == 0.0


def test_neumann_coulomb_check_on_linear_twist(output_dir):
    cfg = ScenarioConfig.from_flat({
        **PLANE_TWIST, "ROUTE": "neumann", "TWIST_B": "-0.5", "CHECKS": "coulomb,tau",
    })
    report = ScenarioService().run_scenario(cfg, write=False)
    coulomb = report.checks["coulomb"]
    assert coulomb.passed
    assert coulomb.residuals["neumann_el_boundary"] <= 1e-3
    assert report.route_agreement is None
    assert report.history_file is None
    assert report.checks["tau"].residuals["boundary"] == 0.0


def test_report_json_repeats_except_wall_time(tmp_path, monkeypatch):
    monkeypatch.delenv("FRAME_LAB_OUTPUT_DIR", raising=False)
    cfg = ScenarioConfig.from_flat({**PLANE_TWIST, "N_R": "16", "N_THETA": "32", "ROUTE": "neumann"})
    payloads = []
    for name in ("first", "second"):
        ScenarioService(tmp_path / name).run_scenario(cfg)
        payload = json.loads((tmp_path / name / "report.json").read_text())
        assert payload.pop("wall_time") >= 0.0
        payloads.append(payload)
    assert "generated_at" not in payloads[0]
    assert payloads[0] == payloads[1]
