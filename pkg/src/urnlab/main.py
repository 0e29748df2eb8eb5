import logging
import sys
from typing import List, Optional

from urnlab import __version__
from urnlab.cli import dispatch
from urnlab.core.config import settings
from urnlab.utils.telemetrics import register_app, setting_otlp

LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] [%(filename)s:%(lineno)d] - %(message)s"


def configure_logging() -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE, mode="a"))
    logging.basicConfig(level=settings.LOG_LEVEL.upper(), format=LOG_FORMAT, handlers=handlers)


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    register_app(settings.APP_NAME, __version__)
    # Setting OpenTelemetry exporter
    setting_otlp(settings.APP_NAME, settings.OTLP_GRPC_ENDPOINT)
    logger = logging.getLogger(__name__)
    logger.info(f"Starting {settings.APP_NAME} {__version__} ({settings.ENV_STATE})")
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
