"""Poisson embedding of p-trees and empirical checks of their distance tails.

Atoms (S_j, U_j), j >= 0, of a rate-1 Poisson process on [0, inf) x [0, 1] give
i.i.d. p-distributed labels Y_j by inverse-CDF lookup of U_j. R1 is the index of
the first repeated label and T1 = S_{R1}, the time of atom R1, so that
N(T1-) = R1 has the law of d(V1, V2) + 1 in the p-tree.
"""

import math
import time
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from pydantic import Field

from frag_core.generators import RankedProbability, p_tree
from frag_core.services.logger import get_logger, log_check_result, log_experiment_event
from frag_core.trees import distance, sample_vertices
from shared.constants import TAG_EMBEDDING, TAG_IDENTITY, TAG_TAILS
from shared.models.base import FrozenModel
from .config import DEFAULT_SEED, DEFAULT_THREADS
from .executor import ReplicateExecutor, replicate_rng
from .stats import chi2_two_sample, wilson_interval

logger = get_logger(__name__)

BLOCK = 1000
DEFAULT_X_GRID = (8.0, 10.0, 12.0)
DEFAULT_CHERNOFF_GRID = (1.0, 2.0, 4.0, 8.0, 16.0)
_SIGMA_MULTIPLES = (0.5, 1.0, 2.0, 3.0, 4.0)
_CAP_FRACTIONS = (0.5, 0.6, 0.7, 0.8, 0.9)


class EmbeddingSample(FrozenModel):
    r1: int = Field(ge=1)
    t1: float = Field(gt=0)
    atoms_used: int


def simulate_embedding(p: RankedProbability, rng: np.random.Generator) -> EmbeddingSample:
    """One exact draw of (R1, T1), generating atoms until the first repeat."""
    cdf = p.cdf()
    last = p.support - 1
    seen = {min(int(np.searchsorted(cdf, rng.random(), side="right")), last)}
    s = rng.exponential()
    j = 0
    while True:
        j += 1
        s += rng.exponential()
        y = min(int(np.searchsorted(cdf, rng.random(), side="right")), last)
        if y in seen:
            return EmbeddingSample(r1=j, t1=s, atoms_used=j + 1)
        seen.add(y)


def _first_repeats(labels: np.ndarray) -> np.ndarray:
    """Per row, the first index whose label already appeared earlier in the row (0 if none)."""
    order = np.argsort(labels, axis=1, kind="stable")
    ranked = np.take_along_axis(labels, order, axis=1)
    repeat = np.zeros_like(labels, dtype=bool)
    repeat[:, 1:] = ranked[:, 1:] == ranked[:, :-1]
    # stable sort keeps later occurrences after the first, so flagged slots are repeats
    index = np.where(repeat, order, labels.shape[1])
    first = index.min(axis=1)
    return np.where(first == labels.shape[1], 0, first)


def simulate_embeddings(p: RankedProbability, rng: np.random.Generator, size: int) -> List[EmbeddingSample]:
    """``size`` draws of (R1, T1) generated a block of labels at a time.

    Rows are drawn with min(N + 1, max(8, ceil(6 / sigma_p))) labels; a row with no
    repeat in that window (probability below e^-18) is finished by the exact
    one-at-a-time sampler. Given R1, T1 is a sum of R1 + 1 unit exponentials.
    """
    width = min(p.support + 1, max(8, math.ceil(6.0 / p.sigma)))
    labels = p.draw(rng, (size, width))
    r1 = _first_repeats(labels)
    out = []
    for r in r1.tolist():
        if r == 0:
            out.append(simulate_embedding(p, rng))
        else:
            out.append(EmbeddingSample(r1=r, t1=float(rng.gamma(r + 1)), atoms_used=r + 1))
    return out


def _blocked_embeddings(p: RankedProbability, count: int, seed: int, threads: int) -> List[EmbeddingSample]:
    blocks = -(-count // BLOCK)

    def one(i: int, rng: np.random.Generator) -> List[EmbeddingSample]:
        return simulate_embeddings(p, rng, min(BLOCK, count - i * BLOCK))

    chunks = ReplicateExecutor(threads).map(one, seed, TAG_EMBEDDING, blocks)
    return [s for chunk in chunks for s in chunk]


def ptree_distances(p: RankedProbability, count: int, seed: int = DEFAULT_SEED,
                    threads: int = DEFAULT_THREADS, pairs_per_tree: int = 1) -> np.ndarray:
    """``count`` draws of d(V1, V2) with V1, V2 independent and p-distributed,
    taking ``pairs_per_tree`` pairs from each sampled p-tree."""
    if pairs_per_tree < 1:
        raise ValueError("pairs_per_tree must be >= 1")
    trees = -(-count // pairs_per_tree)

    def one(i: int, rng: np.random.Generator) -> List[int]:
        tree = p_tree(p, rng)
        ends = sample_vertices(tree, rng, 2 * pairs_per_tree).reshape(-1, 2).tolist()
        return [distance(tree, v, w) for v, w in ends]

    chunks = ReplicateExecutor(threads).map(one, seed, f"{TAG_IDENTITY}:ptree", trees)
    return np.array([d for chunk in chunks for d in chunk][:count], dtype=np.int64)


def birthday_law(n: int, k) -> np.ndarray:
    """P(R1 > k) for uniform p on n atoms: prod_{j=1..k} (1 - j / n)."""
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
    top = int(ks.max()) if ks.size else 0
    factors = np.clip(1.0 - np.arange(1, max(top, 0) + 1) / n, 0.0, None)
    tail = np.concatenate([[1.0], np.cumprod(factors)])
    return tail[np.clip(ks, 0, None)]


class IdentityReport(FrozenModel):
    statistic: float
    p_value: float
    dof: int
    replicates: int
    r1_mean: float
    distance_mean: float
    degenerate: bool

    def passed(self, level: float = 0.01) -> bool:
        return self.p_value > level


def identity_test(p: RankedProbability, replicates: int, seed: int = DEFAULT_SEED,
                  threads: int = DEFAULT_THREADS, pairs_per_tree: int = 1) -> IdentityReport:
    """Two-sample chi-square between R1 and d(V1, V2) + 1."""
    if replicates < 1000:
        raise ValueError(f"identity_test needs at least 1000 replicates, got {replicates}")
    start = time.time()
    r1 = np.array([s.r1 for s in _blocked_embeddings(p, replicates, seed, threads)])
    dist = ptree_distances(p, replicates, seed, threads, pairs_per_tree) + 1
    result = chi2_two_sample(r1, dist)
    report = IdentityReport(
        statistic=result.statistic, p_value=result.p_value, dof=result.dof,
        replicates=replicates, r1_mean=float(r1.mean()), distance_mean=float(dist.mean()),
        degenerate=p.support == 1,
    )
    log_experiment_event(TAG_IDENTITY, "identity test finished",
                         {"support": p.support, "p_value": report.p_value,
                          "duration": time.time() - start})
    return report


class TailStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    UNDERPOWERED = "underpowered"


class TailRow(FrozenModel):
    kind: str
    x_or_t: float
    empirical: float
    upper_conf: float
    bound: float
    passed: bool
    status: TailStatus

    def to_row(self) -> list:
        return [self.kind, repr(self.x_or_t), repr(self.empirical), repr(self.upper_conf),
                repr(self.bound), int(self.passed), self.status.value]


def tail_row(kind: str, at: float, hits: int, trials: int, bound: float,
             confidence: float = 0.95, cluster_size: int = 1) -> TailRow:
    """Empirical tail against a bound; passes iff the Wilson upper limit is below it.

    Hits grouped in clusters of ``cluster_size`` (pairs from one tree) are scored
    as ``trials // cluster_size`` independent draws with the hit count scaled up.
    A row is underpowered when not even zero hits could certify the bound and the
    point estimate stays below it.
    """
    if cluster_size < 1:
        raise ValueError(f"cluster_size must be >= 1, got {cluster_size}")
    effective = max(1, trials // cluster_size)
    scaled = math.ceil(hits * effective / trials) if trials else 0
    upper = wilson_interval(scaled, effective, confidence)[1]
    empirical = hits / trials if trials else 0.0
    passed = upper <= bound
    if passed:
        status = TailStatus.PASS
    elif wilson_interval(0, effective, confidence)[1] > bound and empirical <= bound:
        status = TailStatus.UNDERPOWERED
    else:
        status = TailStatus.FAIL
    return TailRow(kind=kind, x_or_t=at, empirical=empirical, upper_conf=upper, bound=bound,
                   passed=passed, status=status)


class TailTable(FrozenModel):
    support: int
    sigma: float
    replicates: int
    rows: List[TailRow]

    @property
    def all_passed(self) -> bool:
        """No row fails; underpowered rows are reported, not counted."""
        return all(r.status != TailStatus.FAIL for r in self.rows)

    @property
    def underpowered(self) -> List[TailRow]:
        return [r for r in self.rows if r.status == TailStatus.UNDERPOWERED]


def t1_tail_bound(t: float, sigma: float) -> float:
    return math.exp(-t * t * sigma * sigma / 6.0)


def distance_tail_bound(x: float, sigma: float) -> float:
    return math.exp(-x ** (1.0 / 3.0) / (3.0 * sigma)) + 6.0 * math.exp(-x ** (2.0 / 3.0) / 6.0)


def distance_tail_bound_sharp(x: float, sigma: float) -> float:
    """The three-term form before z e^{-z/4} <= 5 e^{-z/6} is applied."""
    c, y = x ** (1.0 / 3.0), x ** (2.0 / 3.0)
    return math.exp(-c / (3.0 * sigma)) + math.exp(-c * c / 6.0) + y * math.exp(-y / 4.0)


def binomial_bound(k: float, p1: float) -> float:
    """P(at most one of U_0..U_floor(k) lands in the heaviest interval)."""
    m = math.floor(k)
    return (1.0 - p1) ** m * (1.0 - p1 + (m + 1) * p1)


def default_t_grid(p: RankedProbability) -> List[float]:
    """sigma^-1 x {0.5, 1, 2, 3, 4} below (2 p1)^-1, or fractions of that cap when
    fewer than five of those survive."""
    cap = 1.0 / (2.0 * p.p[0])
    grid = [m / p.sigma for m in _SIGMA_MULTIPLES if m / p.sigma < cap]
    if len(grid) < len(_SIGMA_MULTIPLES):
        grid = [f * cap for f in _CAP_FRACTIONS]
    return grid


def tail_report(p: RankedProbability, replicates: int, seed: int = DEFAULT_SEED,
                threads: int = DEFAULT_THREADS, t_grid: Optional[Sequence[float]] = None,
                x_grid: Sequence[float] = DEFAULT_X_GRID,
                chernoff_grid: Sequence[float] = DEFAULT_CHERNOFF_GRID,
                pairs_per_tree: int = 1, confidence: float = 0.95) -> TailTable:
    """Empirical tails with Wilson upper limits against the analytic bounds.

    Row kinds: ``T1`` (P(T1 > t)), ``distance`` and ``distance3`` (P(d >= x / sigma)
    against the two-term and three-term bounds), ``chernoff`` (P(N(t) >= 2t) against
    e^{-t/3}), ``binomial`` (the heaviest-interval count, checked for consistency
    with its exact law at 99.9%) and ``distance_binomial`` (P(d >= k) below it).
    Distance rows take ``pairs_per_tree`` pairs from each p-tree and are scored
    per tree.
    """
    if any(x < 8 for x in x_grid):
        raise ValueError(f"distance tail bounds need x >= 8, got {list(x_grid)}")
    cap = 1.0 / (2.0 * p.p[0])
    grid = list(t_grid) if t_grid is not None else default_t_grid(p)
    if any(t < 0 or t >= cap for t in grid):
        raise ValueError(f"T1 tail bound needs 0 <= t < (2 p1)^-1 = {cap}, got {grid}")
    sigma = p.sigma
    p1 = p.p[0]
    start = time.time()
    rows: List[TailRow] = []

    def row(kind: str, at: float, hits: int, trials: int, bound: float, cluster_size: int = 1) -> None:
        rows.append(tail_row(kind, at, hits, trials, bound, confidence, cluster_size))

    t1 = np.array([s.t1 for s in _blocked_embeddings(p, replicates, seed, threads)])
    for t in grid:
        row("T1", t, int((t1 > t).sum()), replicates, t1_tail_bound(t, sigma))

    dist = ptree_distances(p, replicates, seed, threads, pairs_per_tree)
    for x in x_grid:
        hits = int((dist >= x / sigma).sum())
        row("distance", x, hits, replicates, distance_tail_bound(x, sigma), pairs_per_tree)
        row("distance3", x, hits, replicates, distance_tail_bound_sharp(x, sigma), pairs_per_tree)

    rng = replicate_rng(seed, f"{TAG_TAILS}:chernoff", 0)
    for t in chernoff_grid:
        counts = rng.poisson(t, size=replicates)
        row("chernoff", t, int((counts >= 2 * t).sum()), replicates, math.exp(-t / 3.0))

    rng = replicate_rng(seed, f"{TAG_TAILS}:binomial", 0)
    for x in x_grid:
        k = max(2.0, x / sigma)
        m = math.floor(k)
        heavy = np.zeros(replicates, dtype=np.int64)
        for lo in range(0, replicates, BLOCK):
            size = min(BLOCK, replicates - lo)
            heavy[lo:lo + size] = (p.draw(rng, (size, m + 1)) == 0).sum(axis=1)
        hits = int((heavy <= 1).sum())
        bound = binomial_bound(k, p1)
        low, high = wilson_interval(hits, replicates, 0.999)
        consistent = low <= bound <= high
        rows.append(TailRow(kind="binomial", x_or_t=k, empirical=hits / replicates, upper_conf=high,
                            bound=bound, passed=consistent,
                            status=TailStatus.PASS if consistent else TailStatus.FAIL))
        row("distance_binomial", k, int((dist >= k).sum()), replicates, bound, pairs_per_tree)

    table = TailTable(support=p.support, sigma=sigma, replicates=replicates, rows=rows)
    if table.underpowered:
        logger.warning(f"{len(table.underpowered)} tail rows cannot be certified with {replicates} replicates")
    log_check_result(TAG_TAILS, table.all_passed,
                     {"support": p.support, "rows": len(rows), "duration": time.time() - start})
    return table
