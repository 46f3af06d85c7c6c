# Import shared configuration
from shared.config.env import (
    LOG_LEVEL,
    LOG_FILE,
    LOG_JSON,
    DEBUG,
    MASS_TOL,
    EXACT_REGIME_MAX_N,
    WITNESS_MAX_SUPPORT,
    GW_MAX_ATTEMPTS,
    P_TREE_STEP_CAP,
    STABLE_KAPPA,
)
