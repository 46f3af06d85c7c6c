"""Random tree samplers: Cayley, conditioned Galton-Watson, degree-sequence and p-trees.

All samplers are pure functions of their parameters and a ``numpy.random.Generator``.
Plane trees are labelled in depth-first (preorder) order and rooted at 0.
"""

import math
import time
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import Field, field_validator, model_validator
from scipy.special import gammaln, zeta

from shared.models.base import FrozenModel
from .config import GW_MAX_ATTEMPTS, MASS_TOL, P_TREE_STEP_CAP, STABLE_KAPPA
from .errors import SamplerBudgetExceededError
from .services.logger import get_logger, log_performance
from .trees import Tree

logger = get_logger(__name__)

# Words drawn per rejection batch are capped at this many offspring variables
_BATCH_CELLS = 1 << 20


class OffspringKind(str, Enum):
    TABLE = "table"
    POISSON = "poisson"
    GEOMETRIC = "geometric"
    STABLE = "stable"


class OffspringDistribution(FrozenModel):
    """Offspring law mu on {0, 1, 2, ...}.

    ``param`` is the Poisson mean, the geometric stopping probability
    (mu(k) = q (1-q)^k) or the stable index alpha; ``table`` holds mu(0..K)
    for the table kind.
    """

    kind: OffspringKind
    param: float = 1.0
    table: Tuple[float, ...] = Field(default_factory=tuple)

    @model_validator(mode="after")
    def _check(self) -> "OffspringDistribution":
        if self.kind == OffspringKind.TABLE:
            if not self.table or any(p < 0 for p in self.table):
                raise ValueError("offspring table must be a nonempty nonnegative vector")
            if abs(sum(self.table) - 1.0) > MASS_TOL * len(self.table):
                raise ValueError(f"offspring table sums to {sum(self.table)!r}, not 1")
        elif self.kind == OffspringKind.POISSON and self.param <= 0:
            raise ValueError("Poisson mean must be positive")
        elif self.kind == OffspringKind.GEOMETRIC and not 0 < self.param < 1:
            raise ValueError("geometric parameter must lie in (0, 1)")
        elif self.kind == OffspringKind.STABLE and not 1 < self.param < 2:
            raise ValueError("stable offspring laws need alpha in (1, 2)")
        return self

    @classmethod
    def poisson(cls, mean: float = 1.0) -> "OffspringDistribution":
        return cls(kind=OffspringKind.POISSON, param=mean)

    @classmethod
    def geometric(cls, q: float = 0.5) -> "OffspringDistribution":
        return cls(kind=OffspringKind.GEOMETRIC, param=q)

    @classmethod
    def stable(cls, alpha: float) -> "OffspringDistribution":
        return cls(kind=OffspringKind.STABLE, param=alpha)

    @classmethod
    def from_table(cls, probabilities) -> "OffspringDistribution":
        return cls(kind=OffspringKind.TABLE, table=tuple(float(p) for p in probabilities))

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        kf = k.astype(float)
        if self.kind == OffspringKind.TABLE:
            table = np.asarray(self.table)
            inside = (k >= 0) & (k < table.size)
            return np.where(inside, table[np.clip(k, 0, table.size - 1)], 0.0)
        if self.kind == OffspringKind.POISSON:
            lam = self.param
            return np.exp(kf * math.log(lam) - lam - gammaln(kf + 1.0))
        if self.kind == OffspringKind.GEOMETRIC:
            q = self.param
            return q * (1.0 - q) ** kf
        alpha = self.param
        tail = np.where(k >= 1, np.maximum(kf, 1.0) ** (-1.0 - alpha) / zeta(alpha), 0.0)
        return np.where(k == 0, 1.0 - zeta(1.0 + alpha) / zeta(alpha), tail)

    @property
    def mean(self) -> float:
        if self.kind == OffspringKind.TABLE:
            return float(np.dot(np.arange(len(self.table)), self.table))
        if self.kind == OffspringKind.POISSON:
            return self.param
        if self.kind == OffspringKind.GEOMETRIC:
            return (1.0 - self.param) / self.param
        return 1.0

    @property
    def variance(self) -> float:
        if self.kind == OffspringKind.TABLE:
            k = np.arange(len(self.table))
            return float(np.dot(k * k, self.table) - self.mean ** 2)
        if self.kind == OffspringKind.POISSON:
            return self.param
        if self.kind == OffspringKind.GEOMETRIC:
            return (1.0 - self.param) / self.param ** 2
        return math.inf

    @property
    def is_critical(self) -> bool:
        return abs(self.mean - 1.0) <= 1e-9

    def check_conditionable(self) -> None:
        """Standing assumption for conditioned trees: critical, mu(0) > 0, mu(0) + mu(1) < 1."""
        p0, p1 = self.pmf([0, 1])
        if not self.is_critical:
            raise ValueError(f"offspring law must be critical, mean is {self.mean}")
        if p0 <= 0 or p0 + p1 >= 1:
            raise ValueError("offspring law needs mu(0) > 0 and mu(0) + mu(1) < 1")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == OffspringKind.TABLE:
            return rng.choice(len(self.table), size=size, p=np.asarray(self.table))
        if self.kind == OffspringKind.POISSON:
            return rng.poisson(self.param, size=size)
        if self.kind == OffspringKind.GEOMETRIC:
            return rng.geometric(self.param, size=size) - 1
        # mu(k) for k >= 1 is the zeta(1+alpha) law scaled by zeta(1+alpha)/zeta(alpha)
        alpha = self.param
        positive = rng.random(size) < zeta(1.0 + alpha) / zeta(alpha)
        return np.where(positive, rng.zipf(1.0 + alpha, size=size), 0)


def stable_family(alpha: float, base: Optional[OffspringDistribution] = None,
                  kappa: float = STABLE_KAPPA) -> Tuple[OffspringDistribution, Callable[[float], float]]:
    """Offspring law in the domain of attraction of the alpha-stable law and its scaling B_n."""
    if not 1 < alpha <= 2:
        raise ValueError(f"alpha must lie in (1, 2], got {alpha}")
    if alpha == 2:
        mu = base or OffspringDistribution.poisson(1.0)
        sigma = math.sqrt(mu.variance)
        return mu, lambda n: sigma * math.sqrt(n)
    return OffspringDistribution.stable(alpha), lambda n: kappa * n ** (1.0 / alpha)


class DegreeSequence(FrozenModel):
    """counts[i] = N(i), the number of vertices with i children."""

    counts: Tuple[int, ...]

    @field_validator("counts")
    @classmethod
    def _feasible(cls, counts: Tuple[int, ...]) -> Tuple[int, ...]:
        if not counts or any(c < 0 for c in counts):
            raise ValueError("degree counts must be a nonempty nonnegative vector")
        size = sum(counts)
        edges = sum(i * c for i, c in enumerate(counts))
        if size != 1 + edges:
            raise ValueError(f"infeasible degree sequence: sum N(i) = {size} but 1 + sum i N(i) = {1 + edges}")
        return counts

    @property
    def size(self) -> int:
        return sum(self.counts)

    @property
    def sigma2(self) -> int:
        return sum(i * (i - 1) * c for i, c in enumerate(self.counts))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def word(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.counts), dtype=np.int64), self.counts)

    @classmethod
    def from_profile(cls, size: int, profile: OffspringDistribution, max_degree: int = 64) -> "DegreeSequence":
        """Deterministic sequence of about ``size`` vertices with degree frequencies near ``profile``.

        N(i) = floor(size * mu(i)) for i >= 1 and N(0) is set by the feasibility identity.
        """
        probs = profile.pmf(np.arange(max_degree + 1))
        counts = np.floor(size * probs).astype(np.int64)
        counts[0] = 1 + int(np.sum((np.arange(1, counts.size) - 1) * counts[1:]))
        return cls(counts=tuple(int(c) for c in np.trim_zeros(counts, "b")))

    @classmethod
    def from_table(cls, path: Union[str, Path]) -> "DegreeSequence":
        """Read "degree count" lines."""
        pairs = [tuple(int(x) for x in line.split()) for line in Path(path).read_text().splitlines()
                 if line.strip() and not line.startswith("#")]
        counts = [0] * (max(d for d, _ in pairs) + 1)
        for d, c in pairs:
            counts[d] += c
        return cls(counts=tuple(counts))


class RankedProbability(FrozenModel):
    """Decreasing probability vector with finite support (no stored zeros)."""

    p: Tuple[float, ...]

    @field_validator("p")
    @classmethod
    def _ranked(cls, p: Tuple[float, ...]) -> Tuple[float, ...]:
        if not p:
            raise ValueError("probability vector must be nonempty")
        if any(x <= 0 or not math.isfinite(x) for x in p):
            raise ValueError("probabilities must be positive and finite")
        if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ValueError("probabilities must be ranked in decreasing order")
        if abs(math.fsum(p) - 1.0) > MASS_TOL * len(p):
            raise ValueError(f"probabilities sum to {math.fsum(p)!r}, not 1")
        return p

    @property
    def support(self) -> int:
        return len(self.p)

    @property
    def sigma(self) -> float:
        arr = self.array()
        return float(np.sqrt(np.dot(arr, arr)))

    def array(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.array())
        c[-1] = 1.0
        return c

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        """Inverse-CDF draws of atom indices."""
        return np.minimum(np.searchsorted(self.cdf(), rng.random(size), side="right"), self.support - 1)

    @classmethod
    def _from_weights(cls, w: np.ndarray) -> "RankedProbability":
        w = -np.sort(-np.asarray(w, dtype=float))
        w = w / w.sum()
        return cls(p=tuple(float(x) for x in w))

    @classmethod
    def uniform(cls, n: int) -> "RankedProbability":
        return cls(p=(1.0 / n,) * n)

    @classmethod
    def geometric(cls, n: int, ratio: float = 0.9) -> "RankedProbability":
        """p_i proportional to ratio^i, truncated to n atoms."""
        return cls._from_weights(ratio ** np.arange(n, dtype=float))

    @classmethod
    def one_heavy_atom(cls, n: int, p1: float = 0.3) -> "RankedProbability":
        """One atom of mass p1, the rest spread evenly over n - 1 atoms."""
        if n == 1:
            return cls(p=(1.0,))
        rest = (1.0 - p1) / (n - 1)
        if rest > p1:
            raise ValueError("the heavy atom must be at least as large as the others")
        return cls(p=(p1,) + (rest,) * (n - 1))

    @classmethod
    def from_table(cls, path: Union[str, Path]) -> "RankedProbability":
        return cls._from_weights(np.asarray(Path(path).read_text().split(), dtype=float))


def _prufer_decode(seq: np.ndarray, n: int) -> np.ndarray:
    """Linear-time decoding of a Prüfer sequence into an edge array."""
    degree = (np.bincount(seq, minlength=n) + 1).tolist()
    edges = np.empty((n - 1, 2), dtype=np.int64)
    ptr = degree.index(1)
    leaf = ptr
    for i, v in enumerate(seq.tolist()):
        edges[i] = (leaf, v)
        degree[v] -= 1
        if degree[v] == 1 and v < ptr:
            leaf = v
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    edges[n - 2] = (leaf, n - 1)
    return edges


def cayley(n: int, rng: np.random.Generator) -> Tree:
    """Uniform labelled tree on n vertices, rooted at a uniform vertex."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return Tree(1, np.empty((0, 2), dtype=np.int64), root=0)
    if n == 2:
        return Tree(2, np.array([[0, 1]]), root=int(rng.integers(2)))
    edges = _prufer_decode(rng.integers(0, n, size=n - 2), n)
    return Tree(n, edges, root=int(rng.integers(n)))


def cycle_lemma_rotation(word: np.ndarray) -> np.ndarray:
    """Rotate a degree word with sum len-1 so its Lukasiewicz path first hits -1 at the last step."""
    walk = np.cumsum(word - 1)
    if walk[-1] != -1:
        raise ValueError("degree word does not sum to its length minus one")
    k = int(np.argmin(walk)) + 1
    rotated = np.concatenate([word[k:], word[:k]])
    prefix = np.cumsum(rotated - 1)
    # exactly one rotation is valid; this one must be it
    assert prefix[-1] == -1 and (prefix.size == 1 or prefix[:-1].min() >= 0), "cycle lemma rotation failed"
    return rotated


def decode_plane_tree(word: np.ndarray) -> np.ndarray:
    """Parent array of the plane tree whose preorder child counts are ``word``."""
    m = word.size
    parent = np.full(m, -1, dtype=np.int64)
    stack: List[List[int]] = []
    degrees = word.tolist()
    if degrees[0] > 0:
        stack.append([0, degrees[0]])
    for v in range(1, m):
        top = stack[-1]
        parent[v] = top[0]
        top[1] -= 1
        if top[1] == 0:
            stack.pop()
        if degrees[v] > 0:
            stack.append([v, degrees[v]])
    return parent


def _tree_from_word(word: np.ndarray) -> Tree:
    return Tree.from_parents(decode_plane_tree(cycle_lemma_rotation(word)))


def gw_conditioned(mu: OffspringDistribution, n: int, rng: np.random.Generator,
                   max_attempts: int = GW_MAX_ATTEMPTS) -> Tree:
    """Galton-Watson tree with offspring law mu conditioned to have n vertices."""
    mu.check_conditionable()
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return Tree(1, np.empty((0, 2), dtype=np.int64), root=0)

    batch = max(1, min(_BATCH_CELLS // n, 4 * int(math.sqrt(n)) + 16))
    attempts = 0
    start = time.time()
    while attempts < max_attempts:
        rows = min(batch, max_attempts - attempts)
        words = mu.sample(rng, (rows, n))
        hits = np.flatnonzero(words.sum(axis=1) == n - 1)
        if hits.size:
            attempts += int(hits[0]) + 1
            word = rng.permutation(words[hits[0]])
            logger.debug(f"GW word accepted after {attempts} attempts (n={n})")
            log_performance("gw_conditioned", time.time() - start, {"n": n, "attempts": attempts})
            return _tree_from_word(word)
        attempts += rows

    logger.warning(f"GW rejection budget of {max_attempts} words exhausted for n={n}")
    raise SamplerBudgetExceededError(
        f"no offspring word of size {n} summed to {n - 1} in {max_attempts} attempts"
    )


def degree_sequence_tree(s: DegreeSequence, rng: np.random.Generator) -> Tree:
    """Uniform rooted plane tree with the given degree counts."""
    word = s.word()
    if word.size == 1:
        return Tree(1, np.empty((0, 2), dtype=np.int64), root=0)
    return _tree_from_word(rng.permutation(word))


def p_tree(p: RankedProbability, rng: np.random.Generator, step_cap: int = P_TREE_STEP_CAP) -> Tree:
    """Birthday tree: join Y_{j-1} to Y_j whenever Y_j is seen for the first time."""
    N = p.support
    if N == 1:
        return Tree(1, np.empty((0, 2), dtype=np.int64), root=0, weights=[1.0])

    seen = np.zeros(N, dtype=bool)
    chunks = []
    drawn = 0
    batch = 4 * N
    while not seen.all():
        if drawn >= step_cap:
            logger.warning(f"p-tree construction hit the step cap of {step_cap} draws")
            raise SamplerBudgetExceededError(f"p-tree construction exceeded {step_cap} draws")
        chunk = p.draw(rng, min(batch, step_cap - drawn))
        seen[chunk] = True
        chunks.append(chunk)
        drawn += chunk.size
        batch *= 2

    ys = np.concatenate(chunks)
    vertices, first = np.unique(ys, return_index=True)
    new = first > 0
    edges = np.column_stack([ys[first[new] - 1], vertices[new]])
    return Tree(N, edges, root=int(ys[0]), weights=p.array())


class FamilyKind(str, Enum):
    CAYLEY = "cayley"
    GW = "gw"
    DEGSEQ = "degseq"
    PTREE = "ptree"


class PShape(str, Enum):
    UNIFORM = "uniform"
    GEOMETRIC = "geometric"
    HEAVY = "heavy"


class FamilySpec(FrozenModel):
    """Which random tree family to sample, with its parameters."""

    kind: FamilyKind = FamilyKind.CAYLEY
    alpha: float = Field(default=2.0, gt=1.0, le=2.0)
    offspring: Optional[OffspringKind] = None
    degree_table: Optional[str] = None
    p_table: Optional[str] = None
    p_shape: PShape = PShape.UNIFORM
    p_param: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "FamilySpec":
        if self.offspring not in (None, OffspringKind.POISSON, OffspringKind.GEOMETRIC):
            raise ValueError(f"offspring must be poisson or geometric, got {self.offspring.value}")
        if self.offspring is not None and self.alpha < 2:
            raise ValueError(f"offspring={self.offspring.value} has finite variance and needs alpha=2, "
                             f"got alpha={self.alpha:g}")
        return self

    def offspring_law(self) -> Tuple[OffspringDistribution, Callable[[float], float]]:
        base = OffspringDistribution.geometric(0.5) if self.offspring == OffspringKind.GEOMETRIC else None
        return stable_family(self.alpha, base)

    def degree_sequence(self, n: int) -> DegreeSequence:
        if self.degree_table:
            return DegreeSequence.from_table(self.degree_table)
        return DegreeSequence.from_profile(n, OffspringDistribution.poisson(1.0))

    def probabilities(self, n: int) -> RankedProbability:
        if self.p_table:
            return RankedProbability.from_table(self.p_table)
        if self.p_shape == PShape.GEOMETRIC:
            return RankedProbability.geometric(n, self.p_param or 0.9)
        if self.p_shape == PShape.HEAVY:
            return RankedProbability.one_heavy_atom(n, self.p_param or 0.3)
        return RankedProbability.uniform(n)


def sample_tree(spec: FamilySpec, n: int, rng: np.random.Generator) -> Tree:
    if spec.kind == FamilyKind.CAYLEY:
        return cayley(n, rng)
    if spec.kind == FamilyKind.GW:
        return gw_conditioned(spec.offspring_law()[0], n, rng)
    if spec.kind == FamilyKind.DEGSEQ:
        return degree_sequence_tree(spec.degree_sequence(n), rng)
    return p_tree(spec.probabilities(n), rng)


def natural_scale(spec: FamilySpec, n: int) -> float:
    """Distance scale of the family, which is also the clock horizon t_n of its fragmentation.

    sqrt(n) for Cayley trees, n / B_n for conditioned GW trees, |s| / sigma_s for
    degree sequences and 1 / sigma_p for p-trees.
    """
    if n <= 1:
        return 1.0
    if spec.kind == FamilyKind.CAYLEY:
        return math.sqrt(n)
    if spec.kind == FamilyKind.GW:
        return n / spec.offspring_law()[1](n)
    if spec.kind == FamilyKind.DEGSEQ:
        s = spec.degree_sequence(n)
        return s.size / s.sigma if s.sigma2 > 0 else 1.0
    return 1.0 / spec.probabilities(n).sigma


def family_size(spec: FamilySpec, n: int) -> int:
    """Actual vertex count the family produces for a requested size n."""
    if spec.kind == FamilyKind.DEGSEQ:
        return spec.degree_sequence(n).size
    if spec.kind == FamilyKind.PTREE:
        return spec.probabilities(n).support
    return n
