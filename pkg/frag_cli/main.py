import typer

from .commands import acceptance, counterexample, fragment, generate, limit, stats, tails

app = typer.Typer(help="Fragmentation lab: random trees, edge deletion and its checks",
                  no_args_is_help=True)
app.add_typer(generate.app, name="generate")
app.add_typer(fragment.app, name="fragment")
app.add_typer(stats.app, name="stats")
app.add_typer(tails.app, name="tails")
app.add_typer(limit.app, name="limit")
app.add_typer(counterexample.app, name="counterexample")
app.add_typer(acceptance.app, name="acceptance")

if __name__ == "__main__":
    app()
