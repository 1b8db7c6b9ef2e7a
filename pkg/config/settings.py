"""
Configuration settings for the kinetic wave collision lab.
Environment variables override defaults.
"""
import os
from pathlib import Path

# Try to load .env file if python-dotenv is available
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # python-dotenv not installed, use environment variables only

# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent

# Experiment recipes (YAML) checked into the repo
EXPERIMENTS_DIR = PROJECT_ROOT / "config" / "experiments"

# Output directory
OUTPUTS_DIR = PROJECT_ROOT / "outputs"

# Worker count for joblib (-1 = all cores). The only env knob that touches computation.
N_JOBS = int(os.environ.get("KWE_THREADS", "1"))

# Quadrature defaults
DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-14
DEFAULT_MAX_DEPTH = 40
DEFAULT_MAX_PANELS = 4000
DEFAULT_OSC_WINDOW = 8.0

# Frequency grid: [1e-2, 1e6] at 16 points per decade
DEFAULT_GRID = {
    "omega_min": 1e-2,
    "omega_max": 1e6,
    "points_per_decade": 16,
}

# Fit window for log-log exponents
DEFAULT_FIT_WINDOW = (1e2, 1e5)
DEFAULT_FIT_SAMPLES = 12

# Oscillatory datum defaults (A + cos(N w)) <w>^{-M/2}
DEFAULT_OSC_A = 5.0
DEFAULT_OSC_N = 32

DEFAULT_SEED = 0

# Picard acceptance
PICARD_CONTRACTION_LIMIT = 0.6


def resolve_n_jobs(n_jobs=None):
    """Worker count for parallel sampling; falls back to KWE_THREADS."""
    if n_jobs is None:
        n_jobs = N_JOBS
    return int(n_jobs) if int(n_jobs) != 0 else 1
