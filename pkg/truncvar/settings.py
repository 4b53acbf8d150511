"""
Settings for the truncvar project.

Numeric defaults used across the modules live here as module constants. Runtime knobs are
read from the environment, after loading `.env.local` from the repository root if present:

    TRUNCVAR_THREADS    maximum worker threads (default 1)
    TRUNCVAR_LOG_LEVEL  log level of the shared logger (read by setup/logger.py)
"""

import os
from pathlib import Path

from dotenv import load_dotenv

from setup.logger import log, set_level

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env.local")
# The logger was configured before .env.local was read
set_level(os.environ.get("TRUNCVAR_LOG_LEVEL", "INFO"))


# Oracle enumeration is 2^n, keep it in the millisecond range
ORACLE_SIZE_CAP = 14

# Tolerance used when checking membership in the c/2 ball
BALL_TOL = 1e-12

# Special functions: above this argument coth(x) is taken as 1 and sinh is evaluated via exp(-x)
STABLE_ARGUMENT = 40.0

# Distance from a root of the MGF denominator that is rejected as singular
SINGULAR_TOL = 1e-9

# Fixed-time series and quadrature
QUAD_TOL = 1e-10
K_MAX = 200
QUAD_PANELS = 16
QUAD_MAX_DEPTH = 50

# Monte Carlo
MC_CHUNK_SIZE = 1000
MC_MIN_PATHS = 100
# Chunks of long paths are cut down so one padded chunk stays below this many samples
MC_MAX_CHUNK_ELEMENTS = 10_000_000


def read_threads(default: int = 1) -> int:
    """
    Read the thread cap from TRUNCVAR_THREADS.

    Returns:
        int: A positive thread count, `default` when unset or invalid.
    """
    raw = os.environ.get("TRUNCVAR_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        threads = int(raw)
    except ValueError:
        log.warning(f"Ignoring TRUNCVAR_THREADS={raw!r}: not an integer")
        return default
    if threads < 1:
        log.warning(f"Ignoring TRUNCVAR_THREADS={raw!r}: must be positive")
        return default
    return threads
