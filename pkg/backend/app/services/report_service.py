import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

from app.models.fields import IterationRecord
from app.models.grid import DiscGrid
from app.schemas.report import HistoryRecord, RunReport, StudyReport

logger = logging.getLogger(__name__)


class ReportService:
    """Writes reports and plot-ready CSV dumps into one output directory"""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.fields_dir = self.output_dir / "fields"

    def _prepare(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def node_frame(self, grid: DiscGrid) -> pd.DataFrame:
        return pd.DataFrame({
            "node_index": np.arange(grid.n_nodes),
            "r": grid.r,
            "theta": grid.theta,
            "u": grid.u,
            "v": grid.v,
        })

    def write_field(self, grid: DiscGrid, name: str, columns: Dict[str, np.ndarray]) -> Path:
        """One CSV per field: node_index, r, theta, u, v, then value columns"""
        table = self.node_frame(grid)
        for column, values in columns.items():
            grid.check_field(values)
            table[column] = values
        path = self._prepare(self.fields_dir / f"{name}.csv")
        table.to_csv(path, index=False, float_format="%.17g")
        logger.debug(f"Wrote field dump {path}")
        return path

    def write_history(self, history: List[IterationRecord]) -> Path:
        records = [
            HistoryRecord(
                iteration=h.iteration,
                total_torsion=h.total_torsion,
                el_interior=h.el_interior,
                el_boundary=h.el_boundary,
                step=h.step,
            ).model_dump()
            for h in history
        ]
        table = pd.DataFrame(records, columns=list(HistoryRecord.model_fields))
        path = self._prepare(self.output_dir / "history.csv")
        table.to_csv(path, index=False, float_format="%.17g")
        return path

    def write_report(self, report: RunReport) -> Path:
        path = self._prepare(self.output_dir / "report.json")
        path.write_text(report.model_dump_json(indent=2))
        logger.info(f"Report written to {path}")
        return path

    def write_study(self, study: StudyReport) -> Path:
        table = pd.DataFrame([row.model_dump() for row in study.rows])
        path = self._prepare(self.output_dir / "study.csv")
        table.to_csv(path, index=False, float_format="%.10g")
        self._prepare(self.output_dir / "study.json").write_text(study.model_dump_json(indent=2))
        logger.info(f"Study written to {path}")
        return path

    def relative(self, path: Path) -> str:
        return str(path.relative_to(self.output_dir))


def study_table(study: StudyReport) -> str:
    """Plain-text table for the console"""
    table = pd.DataFrame([row.model_dump() for row in study.rows])
    return table.to_string(index=False, float_format=lambda x: f"{x:.4g}", na_rep="-")
