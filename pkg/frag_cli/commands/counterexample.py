import typer
from rich.table import Table

from frag_core.cadlag import counterexample_pair, satisfies_monotone_hypothesis, separation_table
from frag_core.errors import CheckFailure
from shared.constants import COUNTEREXAMPLE_COLUMNS
from ..context import ConfigOption, OutOption, SeedOption, ThreadsOption, TopKOption, build_context, guarded
from ..utils import console, print_success, write_csv

app = typer.Typer(help="Pairwise uniform distances of the non-compact sequence g_n")

SEPARATION = 0.5
MONOTONE_BOUND = 2.0


def check_counterexample(n_max: int):
    """Return (rows, failures) for the separation and monotone-coordinate checks."""
    rows = separation_table(n_max)
    failures = [f"g_{n} vs g_{m}: {d:.6g} < {SEPARATION}"
                for n, m, d in rows if m >= 2 * n and d < SEPARATION - 1e-12]
    for n in range(2, n_max + 1):
        hypothesis = satisfies_monotone_hypothesis(counterexample_pair(n)[1], MONOTONE_BOUND)
        if not hypothesis.holds:
            failures.append(f"f_{n} breaks the monotone hypothesis with M={MONOTONE_BOUND:g}")
    return rows, failures


@app.callback(invoke_without_command=True)
def counterexample(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None,
                   out: OutOption = None, top_k: TopKOption = None):
    """Write counterexample.csv; exit 1 if some pair with m >= 2n sits closer than 1/2."""
    with guarded("counterexample"):
        ctx = build_context(config, seed, threads, out, top_k)
        rows, failures = check_counterexample(ctx.config.counterexample.n_max)
        path = write_csv(ctx.path("counterexample.csv"), ctx.meta, COUNTEREXAMPLE_COLUMNS, rows)

        separated = [d for n, m, d in rows if m >= 2 * n]
        table = Table(title="Uniform separation")
        table.add_column("pairs", style="cyan")
        table.add_column("pairs with m >= 2n", style="cyan")
        table.add_column("min distance (m >= 2n)", style="green")
        table.add_row(str(len(rows)), str(len(separated)), f"{min(separated):.6f}" if separated else "-")
        console.print(table)
        print_success(f"Wrote {path}")

        if failures:
            raise CheckFailure("counterexample", failures[0])
