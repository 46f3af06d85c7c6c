"""Oracles and Monte-Carlo probes for the squared-mass functional Q(t).

Everything here is driven by ``fragment`` trajectories; replicate i of an
experiment draws its tree and clocks from ``replicate_rng(seed, tag, i)``.
"""

import itertools
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field

from frag_core.fragmenter import (
    ClockLaw, FragmentationTrajectory, StoppingTimeSpec, containment_witness, draw_clocks,
    fragment, q_at, s_k_at, state_at, stopping_time,
)
from frag_core.generators import FamilyKind, FamilySpec, natural_scale, sample_tree
from frag_core.masspart import fiber_sums, verify_refinement
from frag_core.services.logger import get_logger, log_check_result, log_experiment_event
from frag_core.trees import Tree, laplace_distance_sum, pairwise_defect, summary
from shared.constants import TAG_AUDIT, TAG_ORACLE, TAG_PROBE, TAG_SCALING
from shared.models.base import FrozenModel
from .config import DEFAULT_SEED, DEFAULT_THREADS, EXACT_REGIME_MAX_N
from .executor import ReplicateExecutor
from .stats import mean_and_se, ratio_spread

logger = get_logger(__name__)

DEFAULT_H_GRID = (0.2, 0.1, 0.05, 0.025)
DEFAULT_K_SET = (1, 2, 4, 8)

# Float slack for audit comparisons of sums over up to ~10^5 masses
AUDIT_TOL = 1e-9

FamilyOrTree = Union[FamilySpec, Tree]


class ExperimentReport(FrozenModel):
    name: str
    n: int
    estimate: float
    standard_error: float = Field(ge=0)
    replicates: int = Field(ge=1)
    exact_value: Optional[float] = None
    seed: int
    wall_time: float = 0.0
    excluded: int = 0

    def to_row(self) -> list:
        exact = "" if self.exact_value is None else repr(self.exact_value)
        return [self.name, self.n, repr(self.estimate), repr(self.standard_error), exact,
                self.replicates, self.seed]

    def within(self, sigmas: float) -> bool:
        """|estimate - exact| <= sigmas * SE; vacuously true without an exact value."""
        if self.exact_value is None:
            return True
        return abs(self.estimate - self.exact_value) <= sigmas * self.standard_error + 1e-15


def _tree_for(source: FamilyOrTree, n: int, rng: np.random.Generator) -> Tree:
    return source if isinstance(source, Tree) else sample_tree(source, n, rng)


def _size_of(source: FamilyOrTree, n: int) -> int:
    return source.n if isinstance(source, Tree) else n


def exact_expected_q(tree: Tree, rate: float, t: float) -> float:
    """E[Q(t) | tree] under Exp(rate) clocks: a pair at distance d stays joined with
    probability exp(-rate t d)."""
    if t < 0 or rate <= 0:
        raise ValueError(f"need t >= 0 and rate > 0, got t={t}, rate={rate}")
    return laplace_distance_sum(tree, rate * t)


def mc_expected_q(family: FamilyOrTree, n: int, rate: float, t: float, replicates: int,
                  seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS) -> ExperimentReport:
    """Monte-Carlo mean of Q(t) over independent (tree, clocks) draws.

    A fixed ``Tree`` in place of a family keeps the tree and redraws only the clocks;
    the report then also carries the exact conditional expectation.
    """
    if replicates < 100:
        raise ValueError(f"mc_expected_q needs at least 100 replicates, got {replicates}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    law = ClockLaw.exponential(rate)
    start = time.time()

    def one(i: int, rng: np.random.Generator) -> float:
        tree = _tree_for(family, n, rng)
        return q_at(fragment(tree, draw_clocks(tree, law, rng)), t)

    values = ReplicateExecutor(threads).map(one, seed, TAG_ORACLE, replicates)
    estimate, se = mean_and_se(values)
    exact = None
    if isinstance(family, Tree) and family.n <= EXACT_REGIME_MAX_N:
        exact = exact_expected_q(family, rate, t)
    return ExperimentReport(
        name=f"EQ(t={t:g})", n=_size_of(family, n), estimate=estimate, standard_error=se,
        replicates=replicates, exact_value=exact, seed=seed, wall_time=time.time() - start,
    )


class Sof3Report(FrozenModel):
    lhs: float
    rhs: float
    holds: bool


def sof3_report(tree: Tree, rate: float, t: float) -> Sof3Report:
    """1 - E Q(t) against t * rate * E d(V1, V2), both exact.

    Both sides come from one pass over the distance matrix; 1 - E Q(t) is
    accumulated as the sum of pair-weighted (1 - exp(-rate t d)).
    """
    if t < 0 or rate <= 0:
        raise ValueError(f"need t >= 0 and rate > 0, got t={t}, rate={rate}")
    defect = pairwise_defect(tree, rate * t)
    return Sof3Report(lhs=defect.defect, rhs=defect.linear, holds=defect.defect <= defect.linear)


class ProbeRow(FrozenModel):
    h: float
    lhs: ExperimentReport
    rhs: ExperimentReport
    holds: bool


class ProbeGrid(FrozenModel):
    stopping: str
    rows: List[ProbeRow]
    trend_holds: bool


def _probe_samples(family: FamilyOrTree, n: int, rate: float, stopping: StoppingTimeSpec,
                   hs: Sequence[float], replicates: int, seed: int,
                   threads: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per replicate: lhs decrements (nan when the stopping time never fires) and rhs
    decrements for every h."""
    law = ClockLaw.exponential(rate)

    def one(i: int, rng: np.random.Generator) -> Tuple[List[float], List[float], float]:
        tree = _tree_for(family, n, rng)
        traj = fragment(tree, draw_clocks(tree, law, rng))
        tau = stopping_time(traj, stopping)
        rhs = [1.0 - q_at(traj, h) for h in hs]
        if math.isinf(tau):
            return [math.nan] * len(hs), rhs, tau
        q_tau = q_at(traj, tau)
        return [q_tau - q_at(traj, tau + h) for h in hs], rhs, tau

    results = ReplicateExecutor(threads).map(one, seed, TAG_PROBE, replicates)
    lhs = np.array([r[0] for r in results], dtype=float).reshape(replicates, len(hs))
    rhs = np.array([r[1] for r in results], dtype=float).reshape(replicates, len(hs))
    taus = np.array([r[2] for r in results], dtype=float)
    return lhs, rhs, taus


def decrement_probe_grid(family: FamilyOrTree, n: int, rate: float, stopping: StoppingTimeSpec,
                         hs: Sequence[float] = DEFAULT_H_GRID, replicates: int = 10_000,
                         seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS) -> ProbeGrid:
    """E[Q(tau) - Q(tau + h)] and 1 - E Q(h) on a decreasing h-grid, sharing replicates.

    Each row holds when lhs <= rhs + 3 (SE_lhs + SE_rhs); the trend holds when lhs is
    nonincreasing along the grid up to 2 (SE_a + SE_b) between neighbours.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if any(h <= 0 for h in hs):
        raise ValueError(f"h values must be positive, got {list(hs)}")
    start = time.time()
    lhs, rhs, taus = _probe_samples(family, n, rate, stopping, hs, replicates, seed, threads)
    excluded = int(np.isinf(taus).sum())
    if excluded:
        logger.info(f"{excluded} of {replicates} replicates never reached {stopping.label()}")
    size = _size_of(family, n)
    elapsed = time.time() - start

    rows = []
    for col, h in enumerate(hs):
        kept = lhs[:, col][~np.isnan(lhs[:, col])]
        if kept.size:
            l_est, l_se = mean_and_se(kept)
        else:
            l_est, l_se = 0.0, 0.0
        r_est, r_se = mean_and_se(rhs[:, col])
        lhs_report = ExperimentReport(
            name=f"decrement[{stopping.label()},h={h:g}]", n=size, estimate=l_est,
            standard_error=l_se, replicates=max(1, int(kept.size)), seed=seed,
            wall_time=elapsed, excluded=excluded,
        )
        rhs_report = ExperimentReport(
            name=f"one_minus_EQ[h={h:g}]", n=size, estimate=r_est, standard_error=r_se,
            replicates=replicates, seed=seed, wall_time=elapsed,
        )
        rows.append(ProbeRow(h=h, lhs=lhs_report, rhs=rhs_report,
                             holds=l_est <= r_est + 3.0 * (l_se + r_se)))

    trend = all(
        b.lhs.estimate <= a.lhs.estimate + 2.0 * (a.lhs.standard_error + b.lhs.standard_error)
        for a, b in zip(rows, rows[1:]) if b.h < a.h
    )
    log_experiment_event(TAG_PROBE, "decrement probe finished",
                         {"stopping": stopping.label(), "n": size, "excluded": excluded})
    return ProbeGrid(stopping=stopping.label(), rows=rows, trend_holds=trend)


def decrement_probe(family: FamilyOrTree, n: int, rate: float, stopping: StoppingTimeSpec,
                    h: float, replicates: int, seed: int = DEFAULT_SEED,
                    threads: int = DEFAULT_THREADS) -> Tuple[ExperimentReport, ExperimentReport]:
    """(E[Q(tau) - Q(tau + h)], 1 - E Q(h)) with standard errors.

    Replicates where tau is infinite are left out of the lhs mean and counted in
    ``excluded``; the rhs always uses every replicate.
    """
    row = decrement_probe_grid(family, n, rate, stopping, (h,), replicates, seed, threads).rows[0]
    return row.lhs, row.rhs


class ScalingRow(FrozenModel):
    n: int
    scale: float
    diameter: float
    diameter_ratio: float
    tpl_per_n: float
    tpl_ratio: float
    mean_distance: float
    mean_distance_ratio: float
    weighted_depth: Optional[float] = None
    replicates: int

    def to_row(self) -> list:
        return [self.n, self.scale, self.diameter, self.diameter_ratio, self.tpl_per_n,
                self.tpl_ratio, self.mean_distance, self.mean_distance_ratio, self.replicates]


class ScalingStudy(FrozenModel):
    family: FamilyKind
    rows: List[ScalingRow]
    spreads: Dict[str, float]

    @property
    def headline(self) -> str:
        """Statistic whose boundedness the family's scaling result is about."""
        if self.family in (FamilyKind.CAYLEY, FamilyKind.GW):
            return "diameter_ratio"
        return "mean_distance_ratio"

    @property
    def headline_spread(self) -> float:
        return self.spreads[self.headline]


def scaling_study(family: FamilySpec, sizes: Sequence[int], replicates: int,
                  seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS) -> ScalingStudy:
    """Diameter, TPL / n and mean pairwise distance per size, each divided by the
    family's natural scale."""
    if not sizes:
        raise ValueError("sizes must be nonempty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be increasing, got {list(sizes)}")

    rows = []
    for n in sizes:
        def one(i: int, rng: np.random.Generator, n=n):
            s = summary(sample_tree(family, n, rng))
            tpl = s.total_path_length / s.n if s.total_path_length is not None else math.nan
            return s.n, s.diameter, tpl, s.mean_pairwise_distance, s.weighted_depth

        stats = ReplicateExecutor(threads).map(one, seed, f"{TAG_SCALING}:{n}", replicates)
        actual = stats[0][0]
        scale = natural_scale(family, n)
        diam = float(np.mean([s[1] for s in stats]))
        tpl = float(np.mean([s[2] for s in stats]))
        dist = float(np.mean([s[3] for s in stats]))
        depths = [s[4] for s in stats if s[4] is not None]
        rows.append(ScalingRow(
            n=actual, scale=scale, diameter=diam, diameter_ratio=diam / scale,
            tpl_per_n=tpl, tpl_ratio=tpl / scale, mean_distance=dist,
            mean_distance_ratio=dist / scale,
            weighted_depth=float(np.mean(depths)) if depths else None,
            replicates=replicates,
        ))

    spreads = {key: ratio_spread([getattr(r, key) for r in rows])
               for key in ("diameter_ratio", "tpl_ratio", "mean_distance_ratio")}
    log_experiment_event(TAG_SCALING, "scaling study finished",
                         {"family": family.kind.value, "sizes": list(sizes), "spreads": spreads})
    return ScalingStudy(family=family.kind, rows=rows, spreads=spreads)


class AuditReport(FrozenModel):
    violations: int
    checks: int
    by_kind: Dict[str, int]
    examples: List[str] = Field(default_factory=list)

    @property
    def clean(self) -> bool:
        return self.violations == 0


class _Tally:
    def __init__(self):
        self.checks = 0
        self.by_kind: Dict[str, int] = {}
        self.examples: List[str] = []

    def check(self, kind: str, ok: bool, detail: str) -> None:
        self.checks += 1
        if ok:
            return
        self.by_kind[kind] = self.by_kind.get(kind, 0) + 1
        if len(self.examples) < 10:
            self.examples.append(f"{kind}: {detail}")

    def report(self) -> AuditReport:
        return AuditReport(violations=sum(self.by_kind.values()), checks=self.checks,
                           by_kind=dict(self.by_kind), examples=list(self.examples))


def trajectory_audit(traj: FragmentationTrajectory, time_grid: Sequence[float],
                     k_set: Sequence[int] = DEFAULT_K_SET, tol: float = AUDIT_TOL) -> AuditReport:
    """Count violations of the deterministic fragmentation inequalities on a time grid.

    Per split: children sum to the parent, and x (x - y_1) <= x^2 - sum y_j^2.
    Per grid time: the state lies in S1 and Q(t) equals its sum of squares.
    Per grid pair t1 < t2: Q and every S_k are nonincreasing,
    S_k(t1) - S_k(t2) <= 2 sqrt(k (Q(t1) - Q(t2))), the containment witness is a
    refinement that conserves mass, and the split inequality holds fibre by fibre.
    """
    grid = sorted(float(t) for t in time_grid)
    if grid and (grid[0] < 0 or (traj.num_events and grid[-1] > traj.horizon)):
        raise ValueError(f"time grid must lie in [0, {traj.horizon}]")
    tally = _Tally()

    parent_mass = traj.node_mass[traj.parents]
    for j in range(traj.num_events):
        x = float(parent_mass[j])
        a, b = (float(v) for v in traj.child_masses[j])
        big = max(a, b)
        tally.check("split_mass", abs(a + b - x) <= tol, f"event {j}: {a} + {b} != {x}")
        tally.check("l1_split", x * (x - big) <= x * x - a * a - b * b + tol,
                    f"event {j} at t={traj.times[j]}")

    q = {}
    sk = {}
    for t in grid:
        state = state_at(traj, t).array()
        total = float(state.sum())
        tally.check("s1", abs(total - 1.0) <= tol and bool(np.all(state >= 0)),
                    f"t={t}: total mass {total}")
        q[t] = q_at(traj, t)
        tally.check("q_moment", abs(q[t] - float(np.dot(state, state))) <= tol,
                    f"t={t}: Q={q[t]}")
        for k in k_set:
            sk[t, k] = s_k_at(traj, t, k)

    for t1, t2 in itertools.combinations(grid, 2):
        if t1 == t2:
            continue
        dq = q[t1] - q[t2]
        tally.check("q_monotone", dq >= -tol, f"Q({t2}) > Q({t1})")
        for k in k_set:
            ds = sk[t1, k] - sk[t2, k]
            tally.check("sk_monotone", ds >= -tol, f"S_{k}({t2}) > S_{k}({t1})")
            tally.check("sk_bound", ds <= 2.0 * math.sqrt(k * max(dq, 0.0)) + tol,
                        f"S_{k} drop {ds} on [{t1}, {t2}]")

        y, x, witness = containment_witness(traj, t1, t2)
        tally.check("refinement", verify_refinement(y, x, witness, tol),
                    f"containment on [{t1}, {t2}]")
        sums = fiber_sums(y, witness)
        coarse = x.padded(max(sums.size, len(x)))
        sums = np.pad(sums, (0, coarse.size - sums.size))
        tally.check("mass_conservation", bool(np.all(np.abs(sums - coarse) <= tol)),
                    f"fibres on [{t1}, {t2}]")

        ya = y.array()
        targets = np.asarray(witness.assignment, dtype=np.int64)
        if ya.size:
            top = np.zeros(coarse.size)
            np.maximum.at(top, targets, ya)
            squares = np.bincount(targets, weights=ya * ya, minlength=coarse.size)
            ok = coarse * (coarse - top) <= coarse * coarse - squares + tol
            tally.check("l1_fibre", bool(np.all(ok)), f"fibres on [{t1}, {t2}]")

    report = tally.report()
    log_check_result(TAG_AUDIT, report.clean,
                     {"violations": report.violations, "checks": report.checks,
                      "by_kind": report.by_kind})
    return report
