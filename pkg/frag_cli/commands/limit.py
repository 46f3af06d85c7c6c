import typer
from rich.table import Table

from frag_lab.excursionlab import marginal_trend, limit_rows
from shared.constants import LIMIT_COLUMNS
from ..context import ConfigOption, OutOption, SeedOption, ThreadsOption, TopKOption, build_context, guarded
from ..utils import console, print_success, print_warning, write_csv, write_json

app = typer.Typer(help="Excursion-length fragmentation of a Brownian excursion")


@app.callback(invoke_without_command=True)
def limit(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None,
          out: OutOption = None, top_k: TopKOption = None):
    """Three largest excursion masses per replicate and time; with ``limit.compare``
    also the KS distance of the Cayley largest mass to the limit."""
    with guarded("limit"):
        ctx = build_context(config, seed, threads, out, top_k)
        cfg = ctx.config
        rows = limit_rows(cfg.times, cfg.replicates, cfg.limit.mesh, ctx.seed, ctx.threads)
        path = write_csv(ctx.path("limit.csv"), ctx.meta, LIMIT_COLUMNS, rows)
        print_success(f"Wrote {path}")

        if not cfg.limit.compare:
            return
        trends = []
        for t in cfg.times:
            trend = marginal_trend(cfg.sizes, t, cfg.replicates, cfg.limit.mesh, ctx.seed, ctx.threads)
            trends.append({"t": t, "decreasing": trend.decreasing,
                           "reports": [r.model_dump() for r in trend.reports]})

            table = Table(title=f"KS distance to the limit at t={t:g}")
            table.add_column("n", style="cyan")
            table.add_column("ks", style="green")
            table.add_column("p-value", style="green")
            for r in trend.reports:
                table.add_row(str(r.n), f"{r.statistic:.4f}", f"{r.p_value:.3g}")
            console.print(table)
            if not trend.decreasing:
                print_warning(f"t={t:g}: KS distance does not decrease over n")
        path = write_json(ctx.path("limit.json"), ctx.meta, {"comparisons": trends})
        print_success(f"Wrote {path}")
