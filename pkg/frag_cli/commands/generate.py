import typer
from rich.table import Table

from frag_core.generators import sample_tree
from frag_core.trees import summary
from frag_lab.executor import ReplicateExecutor
from shared.constants import TAG_GENERATE
from ..context import ConfigOption, OutOption, SeedOption, ThreadsOption, TopKOption, build_context, guarded
from ..utils import console, print_success, write_csv

app = typer.Typer(help="Sample trees and summarize their shape")

COLUMNS = ["n", "replicate", "diameter", "height", "total_path_length",
           "mean_pairwise_distance", "weighted_depth"]


@app.callback(invoke_without_command=True)
def generate(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None,
             out: OutOption = None, top_k: TopKOption = None):
    """Draw `replicates` trees per size; write a summary CSV and the first tree of each size."""
    with guarded("generate"):
        ctx = build_context(config, seed, threads, out, top_k)
        cfg = ctx.config
        rows = []
        table = Table(title=f"Trees ({cfg.family.kind.value})")
        table.add_column("n", style="cyan")
        table.add_column("E[diameter]", style="green")
        table.add_column("E[d(V1,V2)]", style="yellow")

        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        for n in cfg.sizes:
            def one(i, rng, n=n):
                tree = sample_tree(cfg.family, n, rng)
                if i == 0:
                    weights = ctx.path(f"tree_n{n}.weights") if tree.weights is not None else None
                    tree.to_edge_list(ctx.path(f"tree_n{n}.edges"), weights)
                return summary(tree)

            summaries = ReplicateExecutor(ctx.threads).map(one, ctx.seed, f"{TAG_GENERATE}:{n}",
                                                           cfg.replicates)
            for i, s in enumerate(summaries):
                rows.append([s.n, i, s.diameter, "" if s.height is None else s.height,
                             "" if s.total_path_length is None else s.total_path_length,
                             s.mean_pairwise_distance,
                             "" if s.weighted_depth is None else s.weighted_depth])
            table.add_row(str(n), f"{sum(s.diameter for s in summaries) / len(summaries):.3f}",
                          f"{sum(s.mean_pairwise_distance for s in summaries) / len(summaries):.3f}")

        path = write_csv(ctx.path("generate.csv"), ctx.meta, COLUMNS, rows)
        console.print(table)
        print_success(f"Wrote {path}")
