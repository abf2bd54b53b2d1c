import argparse
import logging
import sys
from pathlib import Path
from typing import List, Tuple

from app.api.commands import EXIT_ERROR, EXIT_OK
from app.core.exceptions import FrameLabError, PipelineStageError, ScenarioConfigError
from app.schemas.scenario import ScenarioConfig
from app.services.report_service import study_table
from app.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = "16x32,32x64,64x128"


def parse_levels(text: str) -> List[Tuple[int, int]]:
    """'16x32,32x64' -> [(16, 32), (32, 64)]"""
    levels = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            n_r, n_theta = item.split("x")
            levels.append((int(n_r), int(n_theta)))
        except ValueError:
            raise ScenarioConfigError(f"Bad level '{item}', expected <n_r>x<n_theta>")
    return levels


def register(subparsers) -> None:
    parser = subparsers.add_parser("study", help="Convergence study over grid doublings")
    parser.add_argument("config", type=Path, help="KEY=value scenario file")
    parser.add_argument("--levels", default=DEFAULT_LEVELS,
                        help=f"Comma separated n_r x n_theta levels (default {DEFAULT_LEVELS})")
    parser.add_argument("--output-dir", type=Path, default=None)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    try:
        cfg = ScenarioConfig.from_env_file(args.config)
        study = ScenarioService(args.output_dir).convergence_study(cfg, parse_levels(args.levels))
    except PipelineStageError as e:
        print(f"frame-lab: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (FrameLabError, ValueError) as e:
        print(f"frame-lab: configuration error: {e}", file=sys.stderr)
        return EXIT_ERROR

    print(f"{study.surface}: reference total torsion {study.reference_total_torsion:.6f} ({study.reference_kind})")
    print(study_table(study))
    return EXIT_OK
