"""Column layouts and tags shared by the lab and the command line."""

# Seed-derivation tags, one per experiment stream
TAG_GENERATE = "generate"
TAG_FRAGMENT = "fragment"
TAG_ORACLE = "oracle"
TAG_PROBE = "probe"
TAG_SCALING = "scaling"
TAG_AUDIT = "audit"
TAG_EMBEDDING = "embedding"
TAG_IDENTITY = "identity"
TAG_TAILS = "tails"
TAG_EXCURSION = "excursion"
TAG_LIMIT = "limit"

REPORT_COLUMNS = ["name", "n", "estimate", "se", "exact", "replicates", "seed"]
TAIL_COLUMNS = ["kind", "x_or_t", "empirical", "upper_conf", "bound", "pass", "status"]
SCALING_COLUMNS = [
    "n", "scale", "diameter", "diameter_ratio", "tpl_per_n", "tpl_ratio",
    "mean_distance", "mean_distance_ratio", "replicates",
]
COUNTEREXAMPLE_COLUMNS = ["n", "m", "uniform_distance"]
LIMIT_COLUMNS = ["replicate", "t", "m1", "m2", "m3"]

HEADER_PREFIX = "#"
