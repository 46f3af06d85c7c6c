import typer
from rich.table import Table

from frag_core.errors import CheckFailure, ConfigError
from frag_lab.poissonlab import TailStatus, tail_report
from shared.constants import TAIL_COLUMNS
from ..context import ConfigOption, OutOption, SeedOption, ThreadsOption, TopKOption, build_context, guarded
from ..utils import console, print_error, print_success, print_warning, write_csv, write_json

app = typer.Typer(help="Tail bounds of the Poisson embedding for p-trees")

_MARKS = {TailStatus.PASS: "✅", TailStatus.FAIL: "❌", TailStatus.UNDERPOWERED: "⚠️"}


@app.callback(invoke_without_command=True)
def tails(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None,
          out: OutOption = None, top_k: TopKOption = None):
    """One tail table per size, built from the family's probability vector."""
    with guarded("tails"):
        ctx = build_context(config, seed, threads, out, top_k)
        cfg = ctx.config
        failed = []
        summary = []
        for n in cfg.sizes:
            p = cfg.family.probabilities(n)
            try:
                table = tail_report(p, cfg.replicates, ctx.seed, ctx.threads, t_grid=cfg.tails.t_grid,
                                    x_grid=cfg.tails.x_grid, pairs_per_tree=cfg.tails.pairs_per_tree)
            except ValueError as e:
                raise ConfigError(f"tails n={n}: {e}")
            path = write_csv(ctx.path(f"tails_n{n}.csv"), ctx.meta, TAIL_COLUMNS,
                             [r.to_row() for r in table.rows])
            summary.append({"n": n, "support": table.support, "sigma": table.sigma,
                            "passed": table.all_passed, "underpowered": len(table.underpowered)})

            view = Table(title=f"Tails, support {table.support}, sigma {table.sigma:.4g}")
            for column in ("kind", "x_or_t", "empirical", "upper_conf", "bound", "status"):
                view.add_column(column, style="cyan" if column in ("kind", "x_or_t") else "green")
            for r in table.rows:
                view.add_row(r.kind, f"{r.x_or_t:.4g}", f"{r.empirical:.3e}", f"{r.upper_conf:.3e}",
                             f"{r.bound:.3e}", _MARKS[r.status])
                if r.status == TailStatus.FAIL:
                    failed.append(f"n={n} {r.kind} at {r.x_or_t:g}")
            console.print(view)
            for r in table.underpowered:
                print_warning(f"n={n} {r.kind} at {r.x_or_t:g}: {cfg.replicates} replicates cannot reach "
                              f"the bound {r.bound:.3e}")
            print_success(f"Wrote {path}")

        write_json(ctx.path("tails.json"), ctx.meta, {"tables": summary, "failures": failed})
        if failed:
            for failure in failed:
                print_error(failure)
            raise CheckFailure("tails", failed[0])
