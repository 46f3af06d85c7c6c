#!/usr/bin/env python3
"""
Fragmentation Lab CLI
Entry point for the experiment runner plus a host summary for sizing --threads.
"""

import platform
import sys
from pathlib import Path

import click
import numpy as np
import psutil
import scipy
import typer
from rich.console import Console
from rich.tree import Tree

from frag_cli.main import app as lab_app
from shared.config.env import DEFAULT_SEED, DEFAULT_THREADS, OUTPUT_DIR

__version__ = "0.1.0"

console = Console()


@click.group()
@click.version_option(version=__version__)
def cli():
    """Fragmentation Lab - random tree fragmentation experiments and checks"""
    pass


cli.add_command(typer.main.get_command(lab_app), name="lab")


@cli.group()
def system():
    """Host information"""
    pass


@system.command()
def info():
    """Display system information."""
    tree = Tree("Fragmentation Lab System Information")

    python_branch = tree.add("🐍 Python Environment")
    python_branch.add(f"Python: {sys.version.split()[0]}")
    python_branch.add(f"Platform: {platform.platform()}")
    python_branch.add(f"numpy: {np.__version__}")
    python_branch.add(f"scipy: {scipy.__version__}")

    memory = psutil.virtual_memory()
    host_branch = tree.add("🖥️ Host")
    host_branch.add(f"Physical cores: {psutil.cpu_count(logical=False)}")
    host_branch.add(f"Logical cores: {psutil.cpu_count(logical=True)}")
    host_branch.add(f"Memory available: {memory.available / 1024**3:.1f} GB of {memory.total / 1024**3:.1f} GB")

    defaults_branch = tree.add("⚙️ Defaults")
    defaults_branch.add(f"Seed: {DEFAULT_SEED}")
    defaults_branch.add(f"Threads: {DEFAULT_THREADS}")
    defaults_branch.add(f"Output Dir: {Path(OUTPUT_DIR).resolve()}")
    defaults_branch.add(f"Config File: {Path(__file__).parent / '.env'}")

    console.print(tree)


if __name__ == "__main__":
    cli()
