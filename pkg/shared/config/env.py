import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
env_file = Path(__file__).parent.parent.parent / ".env"
load_dotenv(env_file)

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "")
LOG_JSON = os.getenv("LOG_JSON", "false").lower() == "true"

# Numerical tolerances and exact-regime guards
MASS_TOL = float(os.getenv("MASS_TOL", "1e-12"))
EXACT_REGIME_MAX_N = int(os.getenv("EXACT_REGIME_MAX_N", "5000"))
WITNESS_MAX_SUPPORT = int(os.getenv("WITNESS_MAX_SUPPORT", "12"))

# Sampler budgets
GW_MAX_ATTEMPTS = int(os.getenv("GW_MAX_ATTEMPTS", "200000"))
P_TREE_STEP_CAP = int(float(os.getenv("P_TREE_STEP_CAP", "1e9")))
STABLE_KAPPA = float(os.getenv("STABLE_KAPPA", "1.0"))
EXCURSION_MIN_LENGTH_FACTOR = float(os.getenv("EXCURSION_MIN_LENGTH_FACTOR", "4"))

# Experiment defaults
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "20240917"))
DEFAULT_THREADS = int(os.getenv("DEFAULT_THREADS", "1"))
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "results")
TOP_K = int(os.getenv("TOP_K", "10"))

# Development Configuration
DEBUG = os.getenv("DEBUG", "false").lower() == "true"
