"""Brownian excursion on a grid and the excursion-length fragmentation of e(x) - t x.

Paths are sampled as a Gaussian bridge on k / m, k = 0..m, then cut at their
minimum and re-glued (the Vervaat transform). For a drift t, the pieces at time t
are the lengths of the intervals on which y(x) = e(x) - t x stays above its
running minimum.
"""

import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, model_validator

from frag_core.errors import PathDomainError
from frag_core.fragmenter import ClockLaw, draw_clocks, fragment, state_at
from frag_core.generators import cayley
from frag_core.masspart import MassPartition, RefinementWitness
from frag_core.services.logger import get_logger, log_experiment_event
from shared.constants import TAG_EXCURSION, TAG_LIMIT
from shared.models.base import ArrayModel, FrozenModel
from .config import DEFAULT_SEED, DEFAULT_THREADS, EXCURSION_MIN_LENGTH_FACTOR
from .executor import ReplicateExecutor
from .stats import ks_two_sample, mean_and_se

logger = get_logger(__name__)

DEFAULT_MESH = 1 << 14


class SampledPath(ArrayModel):
    mesh: int = Field(ge=2)
    values: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "SampledPath":
        if self.values.shape != (self.mesh + 1,):
            raise ValueError(f"expected {self.mesh + 1} grid values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")
        return self

    @classmethod
    def of(cls, values) -> "SampledPath":
        arr = np.array(values, dtype=float)
        arr.setflags(write=False)
        return cls(mesh=arr.size - 1, values=arr)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.mesh + 1) / self.mesh

    def at(self, x: float) -> float:
        """Linear interpolation between grid points."""
        if not 0.0 <= x <= 1.0:
            raise PathDomainError(f"x={x} outside [0, 1]")
        return float(np.interp(x, self.grid, self.values))


def _check_mesh(mesh: int) -> None:
    if mesh < 2:
        raise ValueError(f"mesh must be >= 2, got {mesh}")


def brownian_bridges(mesh: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Rows W_k - (k / m) W_m of Gaussian walks with N(0, 1 / m) steps."""
    _check_mesh(mesh)
    walk = np.zeros((size, mesh + 1))
    np.cumsum(rng.normal(0.0, math.sqrt(1.0 / mesh), size=(size, mesh)), axis=1, out=walk[:, 1:])
    return walk - np.outer(walk[:, -1], np.arange(mesh + 1) / mesh)


def brownian_bridge(mesh: int, rng: np.random.Generator) -> SampledPath:
    return SampledPath.of(brownian_bridges(mesh, rng, 1)[0])


def vervaat(bridges: np.ndarray) -> np.ndarray:
    """Cyclic shift of each bridge row to start at its minimum, minus that minimum."""
    rows = np.atleast_2d(bridges)
    m = rows.shape[1] - 1
    cyclic = rows[:, :m]
    k = np.argmin(cyclic, axis=1)
    idx = (k[:, None] + np.arange(m)[None, :]) % m
    shifted = np.take_along_axis(cyclic, idx, axis=1) - cyclic[np.arange(rows.shape[0]), k][:, None]
    out = np.concatenate([shifted, np.zeros((rows.shape[0], 1))], axis=1)
    return out if np.ndim(bridges) == 2 else out[0]


def brownian_excursions(mesh: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` normalized excursions as rows of an array of shape (size, mesh + 1)."""
    return vervaat(brownian_bridges(mesh, rng, size))


def brownian_excursion(mesh: int, rng: np.random.Generator) -> SampledPath:
    return SampledPath.of(brownian_excursions(mesh, rng, 1)[0])


def coupled_excursions(mesh: int, rng: np.random.Generator) -> Tuple[SampledPath, SampledPath]:
    """Excursions at meshes ``mesh`` and ``2 * mesh`` from one driving bridge.

    The coarse bridge is the fine bridge read at every other grid point, which is
    exactly a Gaussian bridge on the coarse grid; each is then transformed on its own.
    """
    fine = brownian_bridges(2 * mesh, rng, 1)[0]
    return SampledPath.of(vervaat(fine[::2])), SampledPath.of(vervaat(fine))


def coarsen(path: SampledPath) -> SampledPath:
    """The same path read on the grid of half the mesh."""
    if path.mesh % 2:
        raise ValueError(f"cannot halve an odd mesh ({path.mesh})")
    return SampledPath.of(path.values[::2])


def _touches(path: SampledPath, t: float) -> np.ndarray:
    """Grid indices where y = path - t x equals its running minimum."""
    if t < 0:
        raise ValueError(f"drift t must be nonnegative, got {t}")
    y = path.values - t * path.grid
    return np.flatnonzero(y == np.minimum.accumulate(y))


def _min_length(path: SampledPath, min_length: Optional[float]) -> float:
    """Default cut of 4 / mesh, switched off on meshes too coarse to have grid noise."""
    if min_length is not None:
        return min_length
    factor = EXCURSION_MIN_LENGTH_FACTOR
    return factor / path.mesh if path.mesh >= 4 * factor else 0.0


def _excursion_steps(path: SampledPath, t: float,
                     min_length: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    cut = _min_length(path, min_length)
    touch = _touches(path, t)
    starts, ends = touch[:-1], touch[1:]
    keep = ((ends - starts) >= 2) & ((ends - starts) / path.mesh > cut)
    return starts[keep], ends[keep]


def excursion_intervals(path: SampledPath, t: float,
                        min_length: Optional[float] = None) -> List[Tuple[float, float]]:
    """Maximal intervals where y stays strictly above its running minimum.

    Two consecutive touch points enclose no excursion. Intervals no longer than
    ``min_length`` (default 4 / mesh) are grid noise and are dropped; the mass
    they carry becomes dust.
    """
    starts, ends = _excursion_steps(path, t, min_length)
    return [(s / path.mesh, e / path.mesh) for s, e in zip(starts.tolist(), ends.tolist())]


def excursion_masses(path: SampledPath, t: float, min_length: Optional[float] = None) -> MassPartition:
    """Decreasing interval lengths of ``excursion_intervals``; total mass at most 1."""
    starts, ends = _excursion_steps(path, t, min_length)
    steps = np.sort(ends - starts)[::-1]
    return MassPartition.trusted(steps / path.mesh)


def interval_witness(fine: Sequence[Tuple[float, float]],
                     coarse: Sequence[Tuple[float, float]]) -> Optional[RefinementWitness]:
    """Map each fine interval (ranked by length) to the ranked coarse interval that
    contains it; None when some fine interval sits in no coarse one."""
    def ranked(intervals):
        return sorted(intervals, key=lambda iv: -(iv[1] - iv[0]))

    coarse_ranked = ranked(coarse)
    starts = np.array([iv[0] for iv in coarse_ranked])
    ends = np.array([iv[1] for iv in coarse_ranked])
    assignment = []
    for s, e in ranked(fine):
        hit = np.flatnonzero((starts <= s + 1e-12) & (ends >= e - 1e-12))
        if hit.size == 0:
            return None
        assignment.append(int(hit[0]))
    return RefinementWitness(assignment=tuple(assignment))


class MeshStability(FrozenModel):
    mesh: int
    t: float
    max_change: float
    tolerance: float
    stable: bool


def mesh_stability(path: SampledPath, t: float, k: int = 3) -> MeshStability:
    """Change of the top-k masses when ``path`` is read at half its mesh, against 2 / m.

    m is the coarse mesh. Both readings drop intervals no longer than the coarse
    noise cut, so the comparison sees grid effects only.
    """
    coarse = coarsen(path)
    cut = _min_length(coarse, None)
    fine_top = excursion_masses(path, t, cut).padded(k)
    coarse_top = excursion_masses(coarse, t, cut).padded(k)
    change = float(np.max(np.abs(fine_top - coarse_top))) if k else 0.0
    tolerance = 2.0 / coarse.mesh
    return MeshStability(mesh=coarse.mesh, t=t, max_change=change, tolerance=tolerance,
                         stable=change <= tolerance + 1e-12)


class StabilityStudy(FrozenModel):
    mesh: int
    samples: int
    stable: int
    median_change: float
    worst_change: float
    tolerance: float

    @property
    def rate(self) -> float:
        return self.stable / self.samples if self.samples else 1.0


def mesh_stability_study(ts: Sequence[float], replicates: int, mesh: int = DEFAULT_MESH,
                         seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS) -> StabilityStudy:
    """``mesh_stability`` over fresh excursions at mesh 2 * ``mesh`` and every t.

    A grid point just below the running minimum can merge two neighbouring
    intervals on one mesh only, so single samples may exceed the tolerance; the
    study reports how often they stay within it.
    """
    def one(i: int, rng: np.random.Generator) -> List[float]:
        path = brownian_excursion(2 * mesh, rng)
        return [mesh_stability(path, t).max_change for t in ts]

    changes = np.array([c for block in ReplicateExecutor(threads).map(one, seed, f"{TAG_EXCURSION}:mesh",
                                                                        replicates) for c in block])
    tolerance = 2.0 / mesh
    return StabilityStudy(mesh=mesh, samples=int(changes.size),
                          stable=int((changes <= tolerance + 1e-12).sum()),
                          median_change=float(np.median(changes)) if changes.size else 0.0,
                          worst_change=float(changes.max()) if changes.size else 0.0,
                          tolerance=tolerance)


# -zeta(1/2) / sqrt(2 pi): the maximum of Brownian motion exceeds its maximum on a
# grid of step 1/m by this times m^{-1/2} on average
GRID_MAX_GAP = 0.5825971579390106


class ExcursionMaxOracle(FrozenModel):
    mesh: int
    replicates: int
    mean: float
    se: float
    target: float
    grid_target: float
    z: float
    passed: bool


def excursion_max_oracle(mesh: int, replicates: int, seed: int = DEFAULT_SEED,
                         threads: int = DEFAULT_THREADS, sigmas: float = 4.0,
                         batch: int = 100) -> ExcursionMaxOracle:
    """Mean of the sampled excursion maximum against E max e = sqrt(pi / 2).

    The grid maximum of a Vervaat excursion is the bridge maximum minus the bridge
    minimum, each read on the grid, so it sits 2 GRID_MAX_GAP / sqrt(mesh) below
    the continuous value; the check is made against that grid target.
    """
    _check_mesh(mesh)
    if replicates < 2:
        raise ValueError(f"excursion_max_oracle needs at least 2 replicates, got {replicates}")
    start = time.time()
    sizes = [min(batch, replicates - lo) for lo in range(0, replicates, batch)]

    def one(i: int, rng: np.random.Generator) -> np.ndarray:
        return brownian_excursions(mesh, rng, sizes[i]).max(axis=1)

    maxima = np.concatenate(ReplicateExecutor(threads).map(one, seed, f"{TAG_EXCURSION}:max", len(sizes)))
    mean, se = mean_and_se(maxima)
    target = math.sqrt(math.pi / 2.0)
    grid_target = target - 2.0 * GRID_MAX_GAP / math.sqrt(mesh)
    z = (mean - grid_target) / se if se > 0 else math.inf
    oracle = ExcursionMaxOracle(mesh=mesh, replicates=replicates, mean=mean, se=se, target=target,
                                grid_target=grid_target, z=z, passed=abs(z) <= sigmas)
    log_experiment_event(TAG_EXCURSION, "excursion max oracle finished",
                         {"mesh": mesh, "z": z, "duration": time.time() - start})
    return oracle


class KSReport(FrozenModel):
    n: int
    t: float
    statistic: float
    p_value: float
    discrete_samples: int
    limit_samples: int
    mesh: int


def limit_largest_masses(t: float, replicates: int, mesh: int = DEFAULT_MESH,
                         seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS) -> np.ndarray:
    def one(i: int, rng: np.random.Generator) -> float:
        m = excursion_masses(brownian_excursion(mesh, rng), t)
        return m[0] if len(m) else 0.0

    return np.array(ReplicateExecutor(threads).map(one, seed, TAG_EXCURSION, replicates))


def cayley_largest_masses(n: int, t: float, replicates: int, seed: int = DEFAULT_SEED,
                          threads: int = DEFAULT_THREADS) -> np.ndarray:
    """Largest component mass at time t for Cayley trees with uniform(0, sqrt(n)) clocks."""
    law = ClockLaw.uniform(math.sqrt(n))

    def one(i: int, rng: np.random.Generator) -> float:
        tree = cayley(n, rng)
        return state_at(fragment(tree, draw_clocks(tree, law, rng)), t)[0]

    return np.array(ReplicateExecutor(threads).map(one, seed, f"{TAG_LIMIT}:cayley:{n}", replicates))


def marginal_comparison(n: int, t: float, replicates: int, mesh: int = DEFAULT_MESH,
                        seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS,
                        limit: Optional[np.ndarray] = None) -> KSReport:
    """Two-sample KS distance between the largest Cayley mass and the limit largest mass."""
    if n < 100:
        raise ValueError(f"marginal_comparison needs n >= 100, got {n}")
    if replicates < 500:
        raise ValueError(f"marginal_comparison needs at least 500 replicates, got {replicates}")
    start = time.time()
    discrete = cayley_largest_masses(n, t, replicates, seed, threads)
    if limit is None:
        limit = limit_largest_masses(t, replicates, mesh, seed, threads)
    result = ks_two_sample(discrete, limit)
    log_experiment_event(TAG_LIMIT, "marginal comparison finished",
                         {"n": n, "t": t, "ks": result.statistic, "duration": time.time() - start})
    return KSReport(n=n, t=t, statistic=result.statistic, p_value=result.p_value,
                    discrete_samples=discrete.size, limit_samples=int(limit.size), mesh=mesh)


class MarginalTrend(FrozenModel):
    reports: List[KSReport]
    decreasing: bool


def marginal_trend(ns: Sequence[int], t: float, replicates: int, mesh: int = DEFAULT_MESH,
                   seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS) -> MarginalTrend:
    """KS distances over increasing n against one shared limit sample.

    The trend counts as decreasing when the largest n is no farther from the limit
    than the smallest.
    """
    limit = limit_largest_masses(t, replicates, mesh, seed, threads)
    reports = [marginal_comparison(n, t, replicates, mesh, seed, threads, limit=limit)
               for n in sorted(ns)]
    decreasing = len(reports) < 2 or reports[-1].statistic <= reports[0].statistic
    return MarginalTrend(reports=reports, decreasing=decreasing)


def limit_rows(ts: Sequence[float], replicates: int, mesh: int = DEFAULT_MESH,
               seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS) -> List[list]:
    """Rows (replicate, t, m1, m2, m3); all times of a replicate share one excursion."""
    def one(i: int, rng: np.random.Generator) -> List[list]:
        path = brownian_excursion(mesh, rng)
        return [[i, float(t)] + excursion_masses(path, t).padded(3).tolist() for t in ts]

    blocks = ReplicateExecutor(threads).map(one, seed, TAG_EXCURSION, replicates)
    return [r for block in blocks for r in block]
