"""Engine configuration from environment variables."""
import os
from pathlib import Path

# Load .env from project root if present
try:
    from dotenv import load_dotenv
    _root = Path(__file__).resolve().parent.parent
    load_dotenv(_root / ".env")
except ImportError:
    pass

BASE_DIR = Path(__file__).resolve().parent.parent


# strip so a trailing space/newline in .env does not break parsing
def _env(key, default=""):
    return (os.getenv(key) or default).strip()


def _env_int(key, default):
    raw = _env(key)
    try:
        return int(raw) if raw else default
    except ValueError:
        return default


def _env_float(key, default):
    raw = _env(key)
    try:
        return float(raw) if raw else default
    except ValueError:
        return default


# Runtime
THREADS = max(1, _env_int("RENORMLAB_THREADS", 4))
SEED = _env_int("RENORMLAB_SEED", 0)
OUTPUT_DIR = Path(_env("RENORMLAB_OUTPUT_DIR") or "out")
LOG_LEVEL = (_env("RENORMLAB_LOG_LEVEL") or "INFO").upper()

# Budgets
DEPTH_BUDGET = _env_int("RENORMLAB_DEPTH_BUDGET", 8)
EPS_BUDGET = _env_float("RENORMLAB_EPS_BUDGET", 0.1)

# Unimodal maps
DOMAIN_SLACK = 1e-9
INVARIANT_GRID = 1024
INVARIANT_TOL = 1e-12
INVERSE_TOL = 1e-13
INVERSE_MAX_ITERS = 50
INVERSE_ULPS = 4.0
REFIT_TOL = 1e-8
REFIT_MIN_DEGREE = 14
CHECK_GRID = 256
FIXED_POINT_DEGREE = 14
FIXED_POINT_MIN_DEGREE = 10
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITERS = 50
FIXED_POINT_GUESS = (1.0, -1.52, 0.1)

# Henon-like maps
MIN_BOX_HALF_HEIGHT = 0.05
BOX_HEIGHT_FACTOR = 4.0
ESCAPE_MARGIN = 0.25
FD_STEP = 1e-5
CONJUGATION_MIN_DZ = 1e-6
CONJUGATION_MAX_ITERS = 50

# Renormalization
STRAIGHTEN_TOL = 1e-12
STRAIGHTEN_MAX_ITERS = 100
# round-off floor in ulps of the fixed-point argument, and the plateau allowance above it
STRAIGHTEN_ULPS = 64.0
STRAIGHTEN_STALL = 3
STRAIGHTEN_FIXED_STEPS = 8
STRAIGHTEN_PLATEAU = 100.0
TUNE_MAX_ITERS = 12

# Cantor set / tips
TIP_TOL = 1e-10
TIP_NEWTON_ITERS = 20
DRIFT_TOL = 1e-7
ADEQUACY_TOL = 0.10
HULL_INFLATE = 1e-6

# Frames
SIGMA_UNDERFLOW = 1e-250
# R entries within R_RESOLVED times their round-off floor do not enter decay fits
R_ULPS = 64.0
R_RESOLVED = 10.0
BRACKET_FLOOR = 1e-13

# Geometry
# held-out diameters may sit this factor outside the fitted bounds
DIAMETER_BAND = 10.0
DOMINANCE_FACTOR = 5.0
OVERLAP_TUNE_TOL = 1e-4
OVERLAP_TUNE_MAX_ITERS = 40
