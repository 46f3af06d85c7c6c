#!/usr/bin/env python3
"""
Fragmentation Lab Setup Script
Installs the Python dependencies, creates the results directory and checks the
local configuration.
"""

import subprocess
import sys
from pathlib import Path


def run_command(cmd, cwd=None):
    """Run a command and return success status."""
    try:
        subprocess.run(cmd, shell=True, cwd=cwd, check=True, capture_output=True, text=True)
        print(f"✓ {cmd}")
        return True
    except subprocess.CalledProcessError as e:
        print(f"✗ {cmd}")
        print(f"Error: {e.stderr}")
        return False


def main():
    """Main setup function."""
    print("🌳 Fragmentation Lab Setup")
    print("=" * 50)

    if sys.version_info < (3, 9):
        print("❌ Python 3.9+ is required")
        sys.exit(1)

    print(f"✓ Python {sys.version_info.major}.{sys.version_info.minor}")

    print("\n📦 Installing Python dependencies...")
    if not run_command(f"{sys.executable} -m pip install -r requirements.txt"):
        print("❌ Failed to install Python dependencies")
        sys.exit(1)

    print("\n📁 Creating directories...")
    Path("results").mkdir(exist_ok=True)
    Path("logs").mkdir(exist_ok=True)
    print("✓ Directories created")

    print("\n⚙️ Configuration...")
    if Path(".env").exists():
        print("✓ .env file found")
    else:
        print("ℹ️ No .env file; built-in defaults apply (see .env.example)")

    print("\n✅ Setup complete!")
    print("\nNext steps:")
    print("1. Check the host: python cli.py system info")
    print("2. Smoke run: python cli.py lab acceptance --profile quick")
    print("3. Example experiment: python cli.py lab stats --config configs/cayley.env")
    print("4. Run tests: ./scripts/test.sh")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by a PEP 517 build backend (pip install); metadata lives in pyproject.toml.
        from setuptools import setup

        setup()
    else:
        main()
