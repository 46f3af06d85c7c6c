from typing import List

import numpy as np
import typer
from rich.table import Table

from frag_core.errors import CheckFailure
from frag_core.fragmenter import ClockKind, draw_clocks, fragment
from frag_core.generators import sample_tree
from frag_lab.config import EXACT_REGIME_MAX_N
from frag_lab.executor import ReplicateExecutor
from frag_lab.tightlab import decrement_probe_grid, mc_expected_q, scaling_study, sof3_report, trajectory_audit
from shared.constants import REPORT_COLUMNS, SCALING_COLUMNS, TAG_AUDIT, TAG_ORACLE
from ..context import (
    ConfigOption, OutOption, RunContext, SeedOption, ThreadsOption, TopKOption, build_context, guarded,
)
from ..utils import StudyKind, console, print_error, print_success, print_warning, write_csv, write_json

app = typer.Typer(help="Oracles, decrement probes, scaling studies and trajectory audits")

AUDIT_GRID_POINTS = 20
SOF3_TREES = 100
AUDIT_TRAJECTORIES = 100


def _rate(ctx: RunContext, n: int) -> float:
    """Exponential rate of the configured clocks; uniform clocks map to 1 / t_max."""
    law = ctx.config.clock.law(ctx.config.family, n)
    return law.rate if law.kind == ClockKind.EXPONENTIAL else 1.0 / law.t_max


def _oracle(ctx: RunContext, reports: list) -> None:
    cfg = ctx.config
    for n in cfg.sizes:
        for t in cfg.times:
            report = mc_expected_q(cfg.family, n, _rate(ctx, n), t, max(cfg.replicates, 100),
                                   ctx.seed, ctx.threads)
            reports.append(report.to_row())


def _sof3(ctx: RunContext, failures: List[str]) -> list:
    cfg = ctx.config
    out = []
    for n in cfg.sizes:
        if n > EXACT_REGIME_MAX_N:
            print_warning(f"sof3: n={n} is beyond the exact regime, skipped")
            continue
        rate = _rate(ctx, n)

        def one(i, rng, n=n, rate=rate):
            tree = sample_tree(cfg.family, n, rng)
            return [sof3_report(tree, rate, t) for t in cfg.times]

        results = ReplicateExecutor(ctx.threads).map(one, ctx.seed, f"{TAG_ORACLE}:sof3:{n}",
                                                     min(cfg.replicates, SOF3_TREES))
        held = all(r.holds for per_tree in results for r in per_tree)
        if not held:
            failures.append(f"sof3 n={n}")
        out.append({"n": n, "trees": len(results), "times": list(cfg.times), "holds": held})
    return out


def _probe(ctx: RunContext, reports: list, failures: List[str]) -> list:
    cfg = ctx.config
    out = []
    for n in cfg.sizes:
        for spec in cfg.probe.stopping_specs():
            grid = decrement_probe_grid(cfg.family, n, _rate(ctx, n), spec, cfg.probe.h,
                                        cfg.replicates, ctx.seed, ctx.threads)
            for row in grid.rows:
                reports.append(row.lhs.to_row())
                reports.append(row.rhs.to_row())
                if not row.holds:
                    failures.append(f"probe n={n} {grid.stopping} h={row.h:g}")
            if not grid.trend_holds:
                failures.append(f"probe trend n={n} {grid.stopping}")
            out.append({"n": n, "stopping": grid.stopping, "trend_holds": grid.trend_holds,
                        "excluded": grid.rows[0].lhs.excluded,
                        "rows": [{"h": r.h, "holds": r.holds} for r in grid.rows]})
    return out


def _audit(ctx: RunContext, failures: List[str]) -> list:
    cfg = ctx.config
    out = []
    for n in cfg.sizes:
        law = cfg.clock.law(cfg.family, n)

        def one(i, rng, law=law, n=n):
            tree = sample_tree(cfg.family, n, rng)
            traj = fragment(tree, draw_clocks(tree, law, rng))
            grid = np.linspace(0.0, traj.horizon, AUDIT_GRID_POINTS)
            return trajectory_audit(traj, grid)

        audits = ReplicateExecutor(ctx.threads).map(one, ctx.seed, f"{TAG_AUDIT}:{n}",
                                                    min(cfg.replicates, AUDIT_TRAJECTORIES))
        violations = sum(a.violations for a in audits)
        if violations:
            failures.append(f"audit n={n}")
        out.append({"n": n, "trajectories": len(audits), "checks": sum(a.checks for a in audits),
                    "violations": violations})
    return out


@app.callback(invoke_without_command=True)
def stats(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None,
          out: OutOption = None, top_k: TopKOption = None):
    """Run the studies listed in `stats.studies` and fail on any violated inequality."""
    with guarded("stats"):
        ctx = build_context(config, seed, threads, out, top_k)
        studies = set(ctx.config.stats.studies)
        reports: list = []
        failures: List[str] = []
        summary = {}

        if StudyKind.ORACLE in studies:
            _oracle(ctx, reports)
        if StudyKind.SOF3 in studies:
            summary["sof3"] = _sof3(ctx, failures)
        if StudyKind.PROBE in studies:
            summary["probe"] = _probe(ctx, reports, failures)
        if StudyKind.AUDIT in studies:
            summary["audit"] = _audit(ctx, failures)
        if StudyKind.SCALING in studies:
            study = scaling_study(ctx.config.family, ctx.config.sizes, ctx.config.replicates,
                                  ctx.seed, ctx.threads)
            write_csv(ctx.path("scaling.csv"), ctx.meta, SCALING_COLUMNS, [r.to_row() for r in study.rows])
            summary["scaling"] = {"headline": study.headline, "spreads": study.spreads}

            table = Table(title="Scaling study")
            for column in ("n", "scale", "diameter_ratio", "mean_distance_ratio"):
                table.add_column(column, style="cyan" if column == "n" else "green")
            for r in study.rows:
                table.add_row(str(r.n), f"{r.scale:.3f}", f"{r.diameter_ratio:.4f}",
                              f"{r.mean_distance_ratio:.4f}")
            console.print(table)

        if reports:
            write_csv(ctx.path("reports.csv"), ctx.meta, REPORT_COLUMNS, reports)
        path = write_json(ctx.path("stats.json"), ctx.meta, {"studies": summary, "failures": failures})
        print_success(f"Wrote {path}")

        if failures:
            for failure in failures:
                print_error(failure)
            raise CheckFailure(failures[0], f"{len(failures)} failing checks")
