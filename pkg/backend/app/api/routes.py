import argparse

from app.api.commands import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK, catalog, run, study

__all__ = ["EXIT_OK", "EXIT_CHECK_FAILED", "EXIT_ERROR", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    """frame-lab run | study | catalog"""
    parser = argparse.ArgumentParser(
        prog="frame-lab",
        description="Normal Coulomb frames of conformal disc immersions",
    )
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL (DEBUG, INFO, ...)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Include all command parsers
    run.register(subparsers)
    study.register(subparsers)
    catalog.register(subparsers)
    return parser
