from typing import Annotated, Optional

import typer
from rich.table import Table

from frag_core.errors import CheckFailure
from ..acceptance import CheckStatus, run_suite
from ..context import ConfigOption, OutOption, SeedOption, ThreadsOption, TopKOption, build_context, guarded
from ..utils import AcceptanceProfile, console, print_success, print_warning, write_json

app = typer.Typer(help="Run the whole acceptance suite at pinned seeds")

ProfileOption = Annotated[Optional[AcceptanceProfile],
                          typer.Option("--profile", help="full (reference workload) or quick")]

_STATUS_STYLE = {
    CheckStatus.PASSED: "✅ passed",
    CheckStatus.WARNING: "⚠️ warning",
    CheckStatus.FAILED: "❌ failed",
}


@app.callback(invoke_without_command=True)
def acceptance(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None,
               out: OutOption = None, top_k: TopKOption = None, profile: ProfileOption = None):
    """Exit 0 when every blocking check passes, 1 otherwise."""
    with guarded("acceptance"):
        ctx = build_context(config, seed, threads, out, top_k)
        chosen = profile or ctx.config.acceptance.profile
        results = run_suite(chosen, ctx.seed, ctx.threads)

        table = Table(title=f"Acceptance ({chosen.value})")
        table.add_column("#", style="cyan")
        table.add_column("Check", style="cyan")
        table.add_column("Status", style="green")
        table.add_column("Time", style="magenta")
        table.add_column("Detail", style="white")
        for r in results:
            table.add_row(str(r.item), r.name, _STATUS_STYLE[r.status], f"{r.duration:.1f}s", r.detail)
        console.print(table)

        path = write_json(ctx.path("acceptance.json"), ctx.meta, {
            "profile": chosen.value,
            "checks": [r.model_dump(mode="json", exclude={"duration"}) for r in results],
        })
        for r in results:
            if r.status == CheckStatus.WARNING:
                print_warning(f"check {r.item} ({r.name}) is advisory: {r.detail}")

        blocking = [r for r in results if r.blocking]
        if blocking:
            first = blocking[0]
            raise CheckFailure(f"{first.item} {first.name}", first.detail)
        print_success(f"All checks passed; wrote {path}")
