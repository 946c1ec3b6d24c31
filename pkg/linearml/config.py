import logging
import math
import os
from typing import Optional

from dotenv import load_dotenv

from linearml.errors import ConfigInvalid

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

DEFAULT_EPS_DIV = 1e-12

logger = logging.getLogger(__name__)


def load_settings() -> None:
    """Load environment variables from an optional .env file"""
    load_dotenv()


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging the same way for every entry point"""
    load_settings()
    level_name = (level or os.getenv('LINEARML_LOG_LEVEL') or 'INFO').upper()
    numeric_level = logging.getLevelName(level_name)
    if not isinstance(numeric_level, int):
        raise ConfigInvalid(f"Unknown log level: {level_name}")
    logging.basicConfig(level=numeric_level, format=LOG_FORMAT)


def get_eps_div() -> float:
    """Division guard used by the consensus estimator"""
    raw = os.getenv('LINEARML_EPS_DIV')
    if raw is None or raw.strip() == '':
        return DEFAULT_EPS_DIV
    try:
        value = float(raw)
    except ValueError:
        raise ConfigInvalid(f"LINEARML_EPS_DIV is not a number: {raw!r}")
    if not math.isfinite(value) or value <= 0:
        raise ConfigInvalid(f"LINEARML_EPS_DIV must be a positive finite number, got {raw!r}")
    return value


def get_results_db() -> Optional[str]:
    return os.getenv('LINEARML_RESULTS_DB') or None


def get_data_dir() -> Optional[str]:
    return os.getenv('LINEARML_DATA_DIR') or None
