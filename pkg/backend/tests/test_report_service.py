import json

import numpy as np
import pandas as pd
import pytest

from app.models.fields import IterationRecord
from app.schemas.report import StudyReport, StudyRow
from app.services.report_service import ReportService, study_table
from tests.helpers import disc_operators


def test_write_field_columns(tmp_path):
    grid = disc_operators(16, 32).grid
    writer = ReportService(tmp_path)
    path = writer.write_field(grid, "radius", {"r_squared": grid.r ** 2})

    assert writer.relative(path) == "fields/radius.csv"
    table = pd.read_csv(path)
    assert list(table.columns) == ["node_index", "r", "theta", "u", "v", "r_squared"]
    assert len(table) == grid.n_nodes
    np.testing.assert_array_equal(table["node_index"], np.arange(grid.n_nodes))
    np.testing.assert_allclose(table["r_squared"].to_numpy(), grid.r ** 2, rtol=1e-14, atol=0)


def test_write_field_rejects_wrong_length(tmp_path):
    grid = disc_operators(16, 32).grid
    with pytest.raises(ValueError, match="nodes"):
        ReportService(tmp_path).write_field(grid, "bad", {"x": np.zeros(grid.n_nodes - 1)})


def test_write_history(tmp_path):
    history = [
        IterationRecord(iteration=0, total_torsion=6.28, el_interior=0.5, el_boundary=1.0, step=0.0),
        IterationRecord(iteration=1, total_torsion=0.1, el_interior=0.05, el_boundary=0.1, step=1.0),
    ]
    path = ReportService(tmp_path).write_history(history)
    table = pd.read_csv(path)
    assert list(table.columns) == ["iteration", "total_torsion", "el_interior", "el_boundary", "step"]
    assert table["total_torsion"].tolist() == [6.28, 0.1]


def test_write_study(tmp_path):
    rows = [
        StudyRow(n_r=16, n_theta=32, h=0.06, total_torsion=1.2, torsion_error=4e-3,
                 el_interior=1e-3, el_boundary=1e-3, ricci_residual=1e-2, weingarten_residual=1e-2),
        StudyRow(n_r=32, n_theta=64, h=0.03, total_torsion=1.21, torsion_error=1e-3, torsion_order=2.0,
                 el_interior=2.5e-4, el_boundary=2.5e-4, ricci_residual=2.5e-3, weingarten_residual=2.5e-3),
    ]
    study = StudyReport(schema_version="1.0", surface="holomorphic_graph",
                        reference_total_torsion=1.2136, reference_kind="analytic", rows=rows)
    path = ReportService(tmp_path).write_study(study)

    table = pd.read_csv(path)
    assert table["n_r"].tolist() == [16, 32]
    assert np.isnan(table["torsion_order"][0])
    assert json.loads((tmp_path / "study.json").read_text())["reference_kind"] == "analytic"
    text = study_table(study)
    assert "torsion_order" in text
