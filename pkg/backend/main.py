import logging
import sys
from typing import List, Optional

from app.api.routes import build_parser
from app.core.config import settings

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    """Configure logging once for the whole process"""
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    logger.debug(f"Starting {settings.app_name} {args.command}")
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
