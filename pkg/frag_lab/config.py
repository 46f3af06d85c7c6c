# Import shared configuration
from shared.config.env import (
    DEFAULT_SEED,
    DEFAULT_THREADS,
    EXACT_REGIME_MAX_N,
    EXCURSION_MIN_LENGTH_FACTOR,
    MASS_TOL,
)
