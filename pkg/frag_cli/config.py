# Import shared configuration
from shared.config.env import (
    DEFAULT_SEED,
    DEFAULT_THREADS,
    OUTPUT_DIR,
    TOP_K,
)
