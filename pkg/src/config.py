import os
import logging
from typing import List, Optional
from dotenv import load_dotenv


def parse_float_grid(raw: str) -> List[float]:
    """
    Parse a comma separated grid (e.g. "0.5,1,2,3,4") into floats.
    Malformed entries are logged and skipped.
    """
    grid: List[float] = []
    if not raw:
        return grid
    for chunk in raw.split(','):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            grid.append(float(chunk))
        except ValueError:
            logging.warning("Skipping invalid grid entry: %s", chunk)
    return grid


def parse_int_grid(raw: str) -> List[int]:
    """
    Parse an integer grid; "4..14" expands to the inclusive range.
    """
    grid: List[int] = []
    if not raw:
        return grid
    for chunk in raw.split(','):
        chunk = chunk.strip()
        if not chunk:
            continue
        if '..' in chunk:
            start, end = chunk.split('..', 1)
            try:
                grid.extend(range(int(start), int(end) + 1))
            except ValueError:
                logging.warning("Skipping invalid range entry: %s", chunk)
            continue
        try:
            grid.append(int(chunk))
        except ValueError:
            logging.warning("Skipping invalid grid entry: %s", chunk)
    return grid


def _env_int(name: str) -> Optional[int]:
    raw = os.getenv(name)
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        logging.warning("Ignoring non-integer %s=%s", name, raw)
        return None


def _env_int_default(name: str, default: int) -> int:
    value = _env_int(name)
    return default if value is None else value


load_dotenv()

class ConfigValidationError(Exception):
    pass

class Config(object):
    LOG_FORMAT = os.getenv("LOG_FORMAT") or '%(asctime)s - %(levelname)s - %(name)s - %(message)s'
    LOG_LEVEL = os.getenv("LOG_LEVEL") or 'INFO'
    APPNAME = os.getenv("APPNAME") or 'cascade-lab'

    # Worker pool
    THREADS = _env_int_default("CASCADE_LAB_THREADS", os.cpu_count() or 1)
    WORKER_BACKEND = (os.getenv("CASCADE_LAB_BACKEND") or "process").strip().lower()
    CHUNK_SIZE = int(os.getenv("CASCADE_LAB_CHUNK_SIZE") or 64)

    # Simulation limits
    MAX_BREADTH_DEPTH = int(os.getenv("MAX_BREADTH_DEPTH") or 26)
    STREAM_BUFFER = int(os.getenv("STREAM_BUFFER") or 256)

    # Run defaults
    DEFAULT_GAMMA = float(os.getenv("DEFAULT_GAMMA") or 0.7)
    DEFAULT_BETA = float(os.getenv("DEFAULT_BETA") or 0.3)
    DEFAULT_DEPTH = int(os.getenv("DEFAULT_DEPTH") or 12)
    DEFAULT_TRIALS = int(os.getenv("DEFAULT_TRIALS") or 10_000)
    DEFAULT_SEED = int(os.getenv("DEFAULT_SEED") or 0)
    DEFAULT_EPSILON0 = float(os.getenv("DEFAULT_EPSILON0") or 0.05)
    DEFAULT_X_GRID = parse_float_grid(os.getenv("DEFAULT_X_GRID", "0.5,1,2,3,4"))
    DEFAULT_L_GRID = parse_int_grid(os.getenv("DEFAULT_L_GRID", "4..10"))
    DIAMETER_MODE = (os.getenv("DIAMETER_MODE") or "exact").strip().lower()

    # Modulus threshold exponents (delta_{l,eps} = l^-((1-eta)/2 - eps))
    MODULUS_ETA = float(os.getenv("MODULUS_ETA") or 0.5)
    MODULUS_EPS = float(os.getenv("MODULUS_EPS") or 0.05)

    # Report output
    OUTPUT_DIR = os.getenv("OUTPUT_DIR") or "output"
    MAX_RETRIES = int(os.getenv("MAX_RETRIES") or 3)

    def __init__(self):
        self.validate_config()

    def validate_config(self):
        """Validate configuration settings"""
        errors = []

        if self.THREADS < 1:
            errors.append("CASCADE_LAB_THREADS must be at least 1")

        if self.WORKER_BACKEND not in ("process", "thread"):
            errors.append("CASCADE_LAB_BACKEND must be 'process' or 'thread'")

        if self.CHUNK_SIZE < 1:
            errors.append("CASCADE_LAB_CHUNK_SIZE must be at least 1")

        if not 0 <= self.MAX_BREADTH_DEPTH <= 30:
            errors.append("MAX_BREADTH_DEPTH must lie in [0, 30]")

        if self.STREAM_BUFFER < 1:
            errors.append("STREAM_BUFFER must be at least 1")

        if not 0 < self.DEFAULT_EPSILON0 < 0.5:
            errors.append("DEFAULT_EPSILON0 must lie in (0, 1/2)")

        if self.DIAMETER_MODE not in ("exact", "bbox"):
            errors.append("DIAMETER_MODE must be 'exact' or 'bbox'")

        if not 0 < self.MODULUS_ETA < 1:
            errors.append("MODULUS_ETA must lie in (0, 1)")

        if self.MAX_RETRIES < 1:
            errors.append("MAX_RETRIES must be at least 1")

        if errors:
            raise ConfigValidationError("\n".join(errors))

        return True
