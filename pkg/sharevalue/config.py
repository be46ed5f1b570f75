# sharevalue/config.py
# Centralized configuration for estimation tolerances, logging and report output.

import os
from dotenv import load_dotenv

# Load environment variables from the root .env file
load_dotenv(dotenv_path=os.path.join(os.path.dirname(__file__), '..', '.env'))


def _flag(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE") or None
LOG_JSON = _flag("LOG_JSON")

# Currency assumed for monetary columns when the input does not declare one.
DEFAULT_CURRENCY = os.getenv("DEFAULT_CURRENCY", "LOCAL")

# Alternating-projection demeaning and effect recovery (max-abs-change stop rule).
DEMEAN_TOLERANCE = float(os.getenv("DEMEAN_TOLERANCE", "1e-10"))
DEMEAN_MAX_ITERATIONS = int(os.getenv("DEMEAN_MAX_ITERATIONS", "1000"))

# Condition number above which a design is treated as rank deficient.
RANK_CONDITION_LIMIT = float(os.getenv("RANK_CONDITION_LIMIT", "1e12"))

# Dummy-variable oracle guard: n_entities + n_periods.
LSDV_MAX_DUMMIES = int(os.getenv("LSDV_MAX_DUMMIES", "5000"))

# Relative eigenvalue cutoff for the Hausman pseudo-inverse.
HAUSMAN_EIGEN_CUTOFF = float(os.getenv("HAUSMAN_EIGEN_CUTOFF", "1e-10"))

# Test level and histogram binning (log units).
DEFAULT_ALPHA = float(os.getenv("DEFAULT_ALPHA", "0.05"))
DEFAULT_BIN_WIDTH = float(os.getenv("DEFAULT_BIN_WIDTH", "0.05"))

# Chunk size for the streaming moment accumulator.
MOMENT_CHUNK_SIZE = int(os.getenv("MOMENT_CHUNK_SIZE", "1024"))

# Worker threads used to fit candidate models during selection.
MAX_WORKERS = int(os.getenv("MAX_WORKERS", "4"))

# Version written in the header line of machine-readable reports.
REPORT_FORMAT_VERSION = int(os.getenv("REPORT_FORMAT_VERSION", "1"))

# Synthetic generator: redraws allowed for an entity that lost every row.
MAX_MISSING_RETRIES = int(os.getenv("MAX_MISSING_RETRIES", "100"))
