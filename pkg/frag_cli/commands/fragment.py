import typer

from frag_core.fragmenter import draw_clocks, fragment as run_fragmentation, q_process
from frag_core.generators import sample_tree
from frag_core.services.logger import log_experiment_event
from frag_lab.executor import replicate_rng
from shared.constants import TAG_FRAGMENT
from ..context import ConfigOption, OutOption, SeedOption, ThreadsOption, TopKOption, build_context, guarded
from ..utils import print_info, print_success, write_csv, write_json

app = typer.Typer(help="Fragment one sampled tree per size and record the trajectory")


@app.callback(invoke_without_command=True)
def fragment(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None,
             out: OutOption = None, top_k: TopKOption = None):
    """Write the full trajectory as JSON and the top-k masses after every event as CSV."""
    with guarded("fragment"):
        ctx = build_context(config, seed, threads, out, top_k)
        cfg = ctx.config
        for n in cfg.sizes:
            rng = replicate_rng(ctx.seed, TAG_FRAGMENT, n)
            tree = sample_tree(cfg.family, n, rng)
            law = cfg.clock.law(cfg.family, n)
            traj = run_fragmentation(tree, draw_clocks(tree, law, rng))
            log_experiment_event(TAG_FRAGMENT, "trajectory built", {"n": tree.n, "events": traj.num_events})

            write_json(ctx.path(f"fragment_n{n}.json"), ctx.meta, {
                "family": cfg.family.model_dump(mode="json"),
                "clock": law.model_dump(mode="json"),
                "trajectory": traj.to_json(),
                "q_process": q_process(traj).to_json(),
            })
            columns = ["t"] + [f"m{i}" for i in range(1, ctx.top_k + 1)]
            path = write_csv(ctx.path(f"fragment_n{n}.csv"), ctx.meta, columns, traj.top_k_rows(ctx.top_k))
            print_info(f"n={tree.n}: {traj.num_events} events, horizon {traj.horizon:.4g}")
            print_success(f"Wrote {path}")
