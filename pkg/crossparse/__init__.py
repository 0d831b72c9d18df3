import os
from pathlib import Path

__author__ = "crossparse developers"
__version__ = "0.3.0"

TOP_DIR = Path(__file__).parent
# Run directories default to the package directory when it is writable
# (editable installs), otherwise to the working directory.
DEFAULT_RUN_ROOT = (
    (TOP_DIR.parent / "runs") if os.access(TOP_DIR.parent, os.W_OK) else Path.cwd() / "runs"
)
