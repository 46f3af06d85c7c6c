"""Options shared by every subcommand and the error-to-exit-code mapping."""

from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Iterator, Optional

import typer

from frag_core.errors import CheckFailure, ConfigError, FragLabError
from frag_core.services.logger import log_error
from shared.models.base import ArrayModel
from .config import DEFAULT_THREADS
from .utils import U64_MAX, ArtifactMeta, ExperimentConfig, load_experiment_config, print_error

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

ConfigOption = Annotated[Optional[Path], typer.Option("--config", help="Experiment config (key = value file)")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Master seed, overrides the config")]
ThreadsOption = Annotated[Optional[int], typer.Option("--threads", help="Worker threads for replicates")]
OutOption = Annotated[Optional[Path], typer.Option("--out", help="Output directory")]
TopKOption = Annotated[Optional[int], typer.Option("--top-k", help="Number of largest masses to report")]


class RunContext(ArrayModel):
    config: ExperimentConfig
    meta: ArtifactMeta
    out_dir: Path
    threads: int
    top_k: int

    @property
    def seed(self) -> int:
        return self.meta.seed

    def path(self, name: str) -> Path:
        return self.out_dir / name


def build_context(config: Optional[Path], seed: Optional[int], threads: Optional[int],
                  out: Optional[Path], top_k: Optional[int]) -> RunContext:
    cfg, digest = load_experiment_config(config)
    if seed is not None:
        if not 0 <= seed <= U64_MAX:
            raise ConfigError(f"--seed must fit in 64 bits, got {seed}")
        cfg = cfg.model_copy(update={"seed": seed})
    if threads is not None and threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {threads}")
    if top_k is not None and top_k < 1:
        raise ConfigError(f"--top-k must be >= 1, got {top_k}")
    return RunContext(
        config=cfg,
        meta=ArtifactMeta(config_sha256=digest, seed=cfg.seed),
        out_dir=Path(out) if out is not None else Path(cfg.output_dir),
        threads=threads or DEFAULT_THREADS,
        top_k=top_k or cfg.top_k,
    )


@contextmanager
def guarded(command: str) -> Iterator[None]:
    """Map failures to exit codes: config errors 2, failed checks and other lab errors 1."""
    try:
        yield
    except ConfigError as e:
        print_error(f"{command}: {e}")
        raise typer.Exit(code=EXIT_USAGE)
    except CheckFailure as e:
        print_error(f"{command}: check '{e.check}' failed: {e.detail}")
        raise typer.Exit(code=EXIT_CHECK_FAILED)
    except FragLabError as e:
        log_error(e, context=command)
        print_error(f"{command}: {e}")
        raise typer.Exit(code=EXIT_CHECK_FAILED)
