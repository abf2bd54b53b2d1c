import argparse
import logging
import sys
from pathlib import Path

from app.api.commands import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK
from app.core.exceptions import FrameLabError, PipelineStageError
from app.schemas.scenario import ScenarioConfig
from app.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="Run one scenario and write its report")
    parser.add_argument("config", type=Path, help="KEY=value scenario file")
    parser.add_argument("--output-dir", type=Path, default=None,
                        help="Output directory (FRAME_LAB_OUTPUT_DIR still wins)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    """Run a scenario; 0 if every enabled check passed, 1 if not, 2 on error"""
    try:
        cfg = ScenarioConfig.from_env_file(args.config)
        report = ScenarioService(args.output_dir).run_scenario(cfg)
    except PipelineStageError as e:
        print(f"frame-lab: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (FrameLabError, ValueError) as e:
        print(f"frame-lab: configuration error: {e}", file=sys.stderr)
        return EXIT_ERROR

    for name, check in report.checks.items():
        status = "PASS" if check.passed else "FAIL"
        worst = max(check.residuals.values(), default=0.0)
        print(f"{status:4}  {name:<11} max residual {worst:.3e}  tolerance {check.tolerance:.3e}")
    if report.total_torsion_final is not None:
        print(f"total torsion {report.total_torsion_initial:.6f} -> {report.total_torsion_final:.6f}")
    else:
        print(f"total torsion {report.total_torsion_initial:.6f}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED
