"""
Runtime configuration for QSQED.

Everything is read from the environment (a local .env file is honoured) with
safe defaults for desk-scale runs.
"""
import logging
import os

from dotenv import load_dotenv

load_dotenv()

SOFTWARE_VERSION = "1.0.0"

# === Numerical tolerance ladder ===
CONSTRUCTION_TOL = 1e-10   # unitarity / hermiticity / completeness of inputs
CONSERVATION_TOL = 1e-12   # norm and trace preservation
DECOMPOSITION_TOL = 1e-9   # gate sequence vs target exponential
EULER_FIT_TOL = 1e-8       # numerically fitted angle sets

# === Register limits ===
DEFAULT_DIM_CAP = 2 ** 16
DEFAULT_DENSE_MAX_DIM = 1024

# === Experiment defaults ===
DEFAULT_SHOTS = 10_000
DEFAULT_SEED = 20240229
MAX_FIT_RESTARTS = 32

TESTING = os.getenv("TESTING", "0") == "1"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def dim_cap() -> int:
    """Largest total register dimension accepted (QSQED_DIM_CAP)."""
    return int(os.getenv("QSQED_DIM_CAP", str(DEFAULT_DIM_CAP)))


def dense_max_dim() -> int:
    """Largest Hamiltonian dimension diagonalized densely."""
    return int(os.getenv("QSQED_DENSE_MAX_DIM", str(DEFAULT_DENSE_MAX_DIM)))


def configure_logging(level: str | None = None) -> None:
    level = (level or os.getenv("QSQED_LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)
