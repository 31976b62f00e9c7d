"""
SleepFS Core Functions Module
Console reporting, seeded random streams and staged file output shared by all commands
"""

import os
import sys
import shutil
import tempfile
from contextlib import contextmanager
from typing import Iterator

import numpy as np
from colorama import Fore, Style, just_fix_windows_console

from .errors import ParamError

# ========== Version Data ==========
APP_VERSION = "1.0.0"
CONFIG_VERSION = "1.0"  # major must match for a config to load

# ========== Output Layout ==========
RESULTS_FILE = "results.json"
TABLE_FILE = "table.md"
CHART_TEMPLATE = "importances-{label}.svg"

# ========== Console ==========

just_fix_windows_console()

# Global quiet switch, toggled by --quiet
_quiet = False


def set_quiet(quiet: bool) -> None:
    """Silence INFO/SUCCESS lines and progress bars"""
    global _quiet
    _quiet = quiet


def is_quiet() -> bool:
    """Whether INFO/SUCCESS lines are silenced"""
    return _quiet


def _emit(colour: str, prefix: str, message: str) -> None:
    print(f"{colour}{prefix}{Style.RESET_ALL} {message}", file=sys.stderr)


def info(message: str) -> None:
    if not _quiet:
        _emit(Fore.CYAN, "INFO:", message)


def success(message: str) -> None:
    if not _quiet:
        _emit(Fore.GREEN, "SUCCESS:", message)


def detail(message: str) -> None:
    """Indented follow-up line under the previous message"""
    if not _quiet:
        print(f"   {message}", file=sys.stderr)


def warning(message: str) -> None:
    _emit(Fore.YELLOW, "WARNING:", message)


def error(message: str) -> None:
    _emit(Fore.RED, "ERROR:", message)


# ========== Random Streams ==========

def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Build a PCG64 generator for one named stream

    Streams derived from the same seed but different stream ids are
    statistically independent, so work split across workers draws the same
    numbers as a serial run.

    Args:
        seed: Non-negative experiment seed
        *stream: Non-negative stream ids (tree index, fold index, ...)

    Returns:
        np.random.Generator: Generator seeded from SeedSequence([seed, *stream])
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ParamError(f"seed must be a non-negative integer, got {seed!r}")
    if any(s < 0 for s in stream):
        raise ParamError(f"stream ids must be non-negative, got {stream!r}")
    entropy = [int(seed), *(int(s) for s in stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


# ========== File Functions ==========

@contextmanager
def staged_output(out_dir: str) -> Iterator[str]:
    """
    Stage files in a temp directory and move them into out_dir on success

    Nothing lands in out_dir if the body raises. Files are moved one by one
    with os.replace, which is atomic per file on the same filesystem.

    Args:
        out_dir: Final output directory (created if missing)

    Yields:
        str: Path of the staging directory to write into
    """
    out_dir = os.path.abspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".sleepfs-", dir=out_dir)
    try:
        yield staging
        for name in sorted(os.listdir(staging)):
            os.replace(os.path.join(staging, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def slugify(label: str) -> str:
    """Lowercase a label into a filename-safe slug"""
    slug = "".join(ch if ch.isalnum() else "-" for ch in label.strip().lower())
    while "--" in slug:
        slug = slug.replace("--", "-")
    return slug.strip("-") or "unnamed"
