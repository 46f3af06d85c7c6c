"""The acceptance suite: every check the lab promises, at pinned seeds.

Each check returns a CheckResult; items 11 (the limit comparison) and 12 (the
excursion sampler) are advisory and may end in a warning instead of a failure.
"""

import math
import time
from enum import Enum
from typing import Callable, Dict, List, Tuple

import numpy as np
from pydantic import Field

from frag_core.errors import FragLabError
from frag_core.fragmenter import (
    ClockLaw, StoppingTimeSpec, TimeChange, couple_clocks, draw_clocks, fragment, state_at, time_change,
)
from frag_core.generators import (
    DegreeSequence, FamilyKind, FamilySpec, OffspringDistribution, RankedProbability, cayley,
    degree_sequence_tree, gw_conditioned, natural_scale, p_tree, sample_tree,
)
from frag_core.services.logger import get_logger, log_check_result
from frag_core.trees import path_tree, star_tree
from frag_lab.executor import ReplicateExecutor
from frag_lab.excursionlab import excursion_max_oracle, marginal_trend, mesh_stability_study
from frag_lab.poissonlab import identity_test, tail_report
from frag_lab.stats import chi2_goodness_of_fit, chi2_two_sample
from frag_lab.tightlab import (
    DEFAULT_H_GRID, decrement_probe_grid, exact_expected_q, mc_expected_q, scaling_study, sof3_report,
    trajectory_audit,
)
from shared.models.base import FrozenModel
from .commands.counterexample import check_counterexample
from .utils import AcceptanceProfile

logger = get_logger(__name__)

STAR4_EXACT_LN2 = 0.53125
CHI2_LEVEL = 0.01
LIMIT_PASS = 0.05
LIMIT_WARN = 0.08
SCALING_SPREAD = 0.25
SOF3_PAIRS = ((1.0, 0.5), (1.0, 2.0), (0.1, 1.0), (0.05, 5.0), (0.5, 0.1))

AUDIT_FAMILIES = (
    FamilySpec(kind=FamilyKind.CAYLEY),
    FamilySpec(kind=FamilyKind.GW),
    FamilySpec(kind=FamilyKind.DEGSEQ),
    FamilySpec(kind=FamilyKind.PTREE),
)
SCALING_FAMILIES = (
    FamilySpec(kind=FamilyKind.CAYLEY),
    FamilySpec(kind=FamilyKind.GW, alpha=1.5),
    FamilySpec(kind=FamilyKind.GW, alpha=2.0),
    FamilySpec(kind=FamilyKind.DEGSEQ),
    FamilySpec(kind=FamilyKind.PTREE),
)


class CheckStatus(str, Enum):
    PASSED = "passed"
    WARNING = "warning"
    FAILED = "failed"


class CheckResult(FrozenModel):
    item: int
    name: str
    status: CheckStatus
    advisory: bool = False
    detail: str = ""
    duration: float = 0.0

    @property
    def blocking(self) -> bool:
        """Advisory checks block only on an outright failure, never on a warning."""
        return self.status == CheckStatus.FAILED


class SuiteSizes(FrozenModel):
    """Workload of every check; ``full`` is the reference suite."""

    audit_n: int
    audit_trajectories: int
    oracle_replicates: int
    sof3_n: int
    sof3_trees: int
    probe_n: int
    probe_replicates: int
    coupling_n: int = 200
    coupling_pairs: int
    identity_support: int = 50
    identity_replicates: int
    tails_support: int
    tails_replicates: int
    sampler_draws: int
    scaling_sizes: Tuple[int, ...]
    scaling_replicates: int
    limit_sizes: Tuple[int, ...]
    limit_replicates: int
    limit_mesh: int = Field(ge=2)
    limit_t: float = 1.0
    excursion_mesh: int = Field(default=1 << 12, ge=4)
    excursion_replicates: int = 10_000
    stability_replicates: int = 200
    counterexample_n_max: int = 64


PROFILES: Dict[AcceptanceProfile, SuiteSizes] = {
    AcceptanceProfile.FULL: SuiteSizes(
        audit_n=1000, audit_trajectories=100, oracle_replicates=10_000, sof3_n=200, sof3_trees=500,
        probe_n=500, probe_replicates=10_000, coupling_pairs=100, identity_replicates=10_000,
        tails_support=1000, tails_replicates=100_000, sampler_draws=100_000,
        scaling_sizes=(400, 800, 1600), scaling_replicates=200, limit_sizes=(500, 1000, 2000),
        limit_replicates=2000, limit_mesh=1 << 14,
    ),
    AcceptanceProfile.QUICK: SuiteSizes(
        audit_n=200, audit_trajectories=10, oracle_replicates=2000, sof3_n=100, sof3_trees=50,
        probe_n=200, probe_replicates=2000, coupling_pairs=20, identity_replicates=2000,
        tails_support=200, tails_replicates=20_000, sampler_draws=20_000,
        scaling_sizes=(50, 200, 800), scaling_replicates=100, limit_sizes=(200, 400, 800),
        limit_replicates=500, limit_mesh=1 << 12,
        excursion_replicates=2000, stability_replicates=50,
    ),
}

Outcome = Tuple[bool, str]


def _audit(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    details = []
    total = 0
    for spec in AUDIT_FAMILIES:
        law = ClockLaw.exponential(1.0 / natural_scale(spec, sizes.audit_n))

        def one(i, rng, spec=spec, law=law):
            tree = sample_tree(spec, sizes.audit_n, rng)
            traj = fragment(tree, draw_clocks(tree, law, rng))
            return trajectory_audit(traj, np.linspace(0.0, traj.horizon, 20))

        audits = ReplicateExecutor(threads).map(one, seed, f"acceptance:audit:{spec.kind.value}",
                                                sizes.audit_trajectories)
        violations = sum(a.violations for a in audits)
        total += violations
        details.append(f"{spec.kind.value}={violations}")
    return total == 0, "violations " + ", ".join(details)


def _oracle(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    ok = abs(exact_expected_q(star_tree(4), 1.0, math.log(2.0)) - STAR4_EXACT_LN2) <= 1e-12
    worst = 0.0
    for tree in (star_tree(4), path_tree(3)):
        for t in (0.2, math.log(2.0), 2.0):
            report = mc_expected_q(tree, tree.n, 1.0, t, sizes.oracle_replicates, seed, threads)
            ok &= report.within(4.0)
            if report.standard_error > 0:
                worst = max(worst, abs(report.estimate - report.exact_value) / report.standard_error)
    return ok, f"largest deviation {worst:.2f} SE"


def _sof3(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    broken = []
    for spec in AUDIT_FAMILIES:
        def one(i, rng, spec=spec):
            tree = sample_tree(spec, sizes.sof3_n, rng)
            return all(sof3_report(tree, r, t).holds for r, t in SOF3_PAIRS)

        held = ReplicateExecutor(threads).map(one, seed, f"acceptance:sof3:{spec.kind.value}",
                                              sizes.sof3_trees)
        if not all(held):
            broken.append(f"{spec.kind.value}: {held.count(False)} trees")
    return not broken, "; ".join(broken) or f"{len(AUDIT_FAMILIES) * sizes.sof3_trees} trees"


def _probe(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    n = sizes.probe_n
    rate = 1.0 / math.sqrt(n)
    broken = []
    for stopping in (StoppingTimeSpec.constant(0.5), StoppingTimeSpec.first_split(),
                     StoppingTimeSpec.first_max_below(0.5)):
        grid = decrement_probe_grid(FamilySpec(kind=FamilyKind.CAYLEY), n, rate, stopping,
                                    DEFAULT_H_GRID, sizes.probe_replicates, seed, threads)
        broken += [f"{grid.stopping} h={row.h:g}" for row in grid.rows if not row.holds]
        if not grid.trend_holds:
            broken.append(f"{grid.stopping} trend")
    return not broken, "; ".join(broken)


def _coupling(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    n = sizes.coupling_n
    t_n = math.sqrt(n)
    law = ClockLaw.uniform(t_n)
    grid = np.linspace(0.0, 3.0 * t_n, 100)

    def one(i, rng):
        tree = cayley(n, rng)
        clocks = draw_clocks(tree, law, rng)
        reference = fragment(tree, clocks)
        coupled = fragment(tree, couple_clocks(clocks))
        same_events = (np.array_equal(coupled.parents, reference.parents)
                       and np.array_equal(coupled.children, reference.children)
                       and np.array_equal(coupled.child_masses, reference.child_masses))
        probes = rng.uniform(0.0, 3.0 * t_n, size=10)
        same_states = all(
            state_at(coupled, t).masses == state_at(reference, time_change(t, t_n, TimeChange.A)).masses
            for t in probes
        )
        return same_events and same_states

    results = ReplicateExecutor(threads).map(one, seed, "acceptance:coupling", sizes.coupling_pairs)
    roundtrip = max(
        abs(time_change(time_change(t, t_n, TimeChange.A), t_n, TimeChange.B) - t) / max(t, 1e-300)
        for t in grid[1:]
    )
    ok = all(results) and roundtrip <= 1e-12
    return ok, f"{results.count(True)}/{len(results)} coupled trajectories, b(a(t)) error {roundtrip:.1e}"


def _identity(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    m = sizes.identity_support
    shapes = {"uniform": RankedProbability.uniform(m), "geometric": RankedProbability.geometric(m),
              "heavy": RankedProbability.one_heavy_atom(m)}
    reports = {name: identity_test(p, sizes.identity_replicates, seed, threads) for name, p in shapes.items()}
    ok = all(r.passed(CHI2_LEVEL) for r in reports.values())
    return ok, ", ".join(f"{name} p={r.p_value:.3g}" for name, r in reports.items())


def _tails(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    table = tail_report(RankedProbability.uniform(sizes.tails_support), sizes.tails_replicates, seed, threads)
    broken = [f"{r.kind}@{r.x_or_t:g}" for r in table.rows if not r.passed]
    return not broken, "; ".join(broken) or f"{len(table.rows)} rows"


def _encode(keys: List, index: Dict) -> np.ndarray:
    return np.array([index.setdefault(k, len(index)) for k in keys], dtype=np.int64)


def _uniform_gof(keys: List, categories: List) -> float:
    index = {k: i for i, k in enumerate(categories)}
    if any(k not in index for k in keys):
        return 0.0
    observed = np.bincount(_encode(keys, index), minlength=len(categories))
    return chi2_goodness_of_fit(observed, np.full(len(categories), 1.0 / len(categories))).p_value


def _samplers(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    draws = sizes.sampler_draws
    run = ReplicateExecutor(threads).map

    cayley3 = run(lambda i, rng: cayley(3, rng).canonical_key(), seed, "acceptance:sampler:cayley", draws)
    p_values = {"cayley(3)": _uniform_gof(cayley3, [((0, 1), (0, 2)), ((0, 1), (1, 2)), ((0, 2), (1, 2))])}

    geometric = OffspringDistribution.geometric(0.5)
    shapes = run(lambda i, rng: int(gw_conditioned(geometric, 3, rng).degrees()[0]), seed,
                 "acceptance:sampler:gw", draws)
    p_values["gw(3)"] = _uniform_gof(shapes, [1, 2])

    s = DegreeSequence(counts=(2, 1, 1))

    def plane_word(i, rng):
        tree = degree_sequence_tree(s, rng)
        return tuple(np.bincount(tree.parent[tree.parent >= 0], minlength=tree.n).tolist())

    words = run(plane_word, seed, "acceptance:sampler:degseq", draws)
    p_values["degseq(2,1,1)"] = _uniform_gof(words, [(2, 0, 1, 0), (2, 1, 0, 0), (1, 2, 0, 0)])

    uniform4 = RankedProbability.uniform(4)

    def rooted(tree):
        return tree.canonical_key(), tree.root

    ptrees = run(lambda i, rng: rooted(p_tree(uniform4, rng)), seed, "acceptance:sampler:ptree", draws)
    cayleys = run(lambda i, rng: rooted(cayley(4, rng)), seed, "acceptance:sampler:cayley4", draws)
    index: Dict = {}
    p_values["ptree(4)"] = chi2_two_sample(_encode(ptrees, index), _encode(cayleys, index)).p_value

    ok = all(p > CHI2_LEVEL for p in p_values.values())
    return ok, ", ".join(f"{name} p={p:.3g}" for name, p in p_values.items())


def _scaling(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    spreads = {}
    for spec in SCALING_FAMILIES:
        study = scaling_study(spec, sizes.scaling_sizes, sizes.scaling_replicates, seed, threads)
        label = f"{spec.kind.value}(alpha={spec.alpha:g})" if spec.kind == FamilyKind.GW else spec.kind.value
        spreads[label] = study.headline_spread
    ok = all(v < SCALING_SPREAD for v in spreads.values())
    return ok, ", ".join(f"{k} {v:.1%}" for k, v in spreads.items())


def _counterexample(sizes: SuiteSizes, seed: int, threads: int) -> Outcome:
    rows, failures = check_counterexample(sizes.counterexample_n_max)
    return not failures, failures[0] if failures else f"{len(rows)} pairs separated"


def _limit(sizes: SuiteSizes, seed: int, threads: int) -> Tuple[CheckStatus, str]:
    trend = marginal_trend(sizes.limit_sizes, sizes.limit_t, sizes.limit_replicates, sizes.limit_mesh,
                           seed, threads)
    ks = trend.reports[-1].statistic
    detail = ", ".join(f"n={r.n} ks={r.statistic:.4f}" for r in trend.reports)
    if ks <= LIMIT_PASS and trend.decreasing:
        return CheckStatus.PASSED, detail
    if ks <= LIMIT_WARN:
        return CheckStatus.WARNING, detail
    return CheckStatus.FAILED, detail


def _excursion(sizes: SuiteSizes, seed: int, threads: int) -> Tuple[CheckStatus, str]:
    oracle = excursion_max_oracle(sizes.excursion_mesh, sizes.excursion_replicates, seed, threads)
    study = mesh_stability_study((0.5, 1.0, 2.0), sizes.stability_replicates, sizes.excursion_mesh // 2,
                                 seed, threads)
    detail = (f"mean max {oracle.mean:.4f} vs grid target {oracle.grid_target:.4f} (z={oracle.z:.2f}), "
              f"mesh doubling within 2/m in {study.rate:.1%} of {study.samples} samples")
    if oracle.passed and study.median_change <= study.tolerance:
        return CheckStatus.PASSED, detail
    return CheckStatus.WARNING, detail


CHECKS: List[Tuple[int, str, Callable[[SuiteSizes, int, int], Outcome]]] = [
    (1, "trajectory audit", _audit),
    (2, "exact oracle", _oracle),
    (3, "sof3 inequality", _sof3),
    (4, "decrement probe", _probe),
    (5, "clock coupling", _coupling),
    (6, "embedding identity", _identity),
    (7, "tail bounds", _tails),
    (8, "sampler exactness", _samplers),
    (9, "scaling studies", _scaling),
    (10, "counterexample", _counterexample),
]


def _timed(item: int, name: str, body: Callable[[], Tuple[CheckStatus, str]], advisory: bool = False) -> CheckResult:
    start = time.time()
    try:
        status, detail = body()
    except (FragLabError, ValueError) as e:
        logger.error(f"Acceptance check {item} ({name}) raised: {e}")
        status, detail = CheckStatus.FAILED, f"{type(e).__name__}: {e}"
    result = CheckResult(item=item, name=name, status=status, advisory=advisory, detail=detail,
                         duration=time.time() - start)
    log_check_result(f"acceptance:{item}", status != CheckStatus.FAILED,
                     {"name": name, "detail": detail, "duration": result.duration})
    return result


def run_suite(profile: AcceptanceProfile, seed: int, threads: int) -> List[CheckResult]:
    sizes = PROFILES[AcceptanceProfile(profile)]
    results = []
    for item, name, check in CHECKS:
        def body(check=check):
            ok, detail = check(sizes, seed, threads)
            return (CheckStatus.PASSED if ok else CheckStatus.FAILED), detail

        results.append(_timed(item, name, body))
    results.append(_timed(11, "limit comparison", lambda: _limit(sizes, seed, threads), advisory=True))
    results.append(_timed(12, "excursion sampler", lambda: _excursion(sizes, seed, threads), advisory=True))
    return results
