import logging
import os
from functools import lru_cache
from pydantic import BaseSettings


# Default spectral box and solver tolerances
DEFAULT_GRID = {
    "GRID_HALF_LENGTH": 16.0,
    "GRID_POINTS": 32,
}

LOG_FORMAT = "[%(asctime)s] %(name)s %(levelname)s: %(message)s"
LOG_DATE_FORMAT = "%A, %d. %B %Y %I:%M:%S %p"


class Settings(BaseSettings):
    APP_ENV_NAME: str = "testing"
    LOG_LEVEL: str = "INFO"
    GRID_HALF_LENGTH: float = DEFAULT_GRID["GRID_HALF_LENGTH"]
    GRID_POINTS: int = DEFAULT_GRID["GRID_POINTS"]
    BLOWUP_FACTOR: float = 1e6
    PICARD_MAX_ITER: int = 64
    PICARD_TOL: float = 1e-10
    SAMPLE_MAX_DENOMINATOR: int = 2**48
    SAMPLE_MAX_RESAMPLES: int = 1000
    INEQUALITY_RTOL: float = 1e-6
    WORKERS: int = 1
    OUTPUT_DIR: str = "results"


@lru_cache()
def get_settings():
    # Set the config based on the environment
    if os.environ.get("APP_ENV") == "development":  # pragma: no cover
        settings = Settings(_env_file=".dev.env", _env_file_encoding="utf-8")
    elif os.environ.get("APP_ENV") == "production":  # pragma: no cover
        settings = Settings(_env_file=".prod.env", _env_file_encoding="utf-8")
    else:
        settings = Settings(_env_file=".test.env", _env_file_encoding="utf-8")
    return settings


def configure_logging(settings: Settings):
    """
    Configure the root logger once from the settings.

    :param settings: resolved Settings

    :returns: the package logger
    """
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
    )
    logger = logging.getLogger("app")
    logger.debug("Loaded %s settings", settings.APP_ENV_NAME)
    return logger
