"""Launcher for the command-line tools: ``python sdfvr.py <command> [options]``."""

import sys
from pathlib import Path

sys.path.append(str(Path(__file__).resolve().parent / "src"))

from commands.main import main

if __name__ == "__main__":
    sys.exit(main())
