"""Helper utility functions for crossparse.

This module provides word normalisation, the stable feature hash, the seeded
random generator used by every stochastic step, and run-manifest I/O.
"""

import hashlib
import json
import logging
import re
from functools import lru_cache
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

_DIGITS = re.compile(r"\d")


def normalize_word(word: str, lowercase: bool = False, digits: bool = False) -> str:
    """Apply the optional lowercasing and digit normalisation used by clustering.

    Args:
        word: The token to normalise.
        lowercase: Lowercase the token.
        digits: Replace every digit with ``0``.

    Returns:
        The normalised token.

    Example:
        >>> normalize_word("Route66", lowercase=True, digits=True)
        'route00'
    """
    if lowercase:
        word = word.lower()
    if digits:
        word = _DIGITS.sub("0", word)
    return word


@lru_cache(maxsize=1 << 20)
def stable_hash64(text: str) -> int:
    """Hash a string to an unsigned 64-bit integer, identically across processes.

    Python's built-in ``hash`` is salted per process, so feature identities use
    BLAKE2b with an 8-byte digest instead.
    """
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    """Return the PCG64 generator every seeded step draws from."""
    return np.random.Generator(np.random.PCG64(seed))


def file_digest(path: str | Path) -> str:
    """SHA-256 hex digest of a file, recorded in run manifests."""
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for block in iter(lambda: file.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def read_manifest(run_dir: str | Path) -> dict:
    """Read ``manifest.json`` from a run directory.

    Returns:
        The manifest, or an empty dict if the file doesn't exist.
    """
    path = Path(run_dir) / "manifest.json"
    try:
        with open(path, encoding="utf-8") as file:
            return json.load(file)
    except FileNotFoundError:
        logger.info("no manifest in %s, starting a new one", run_dir)
    return {}


def write_manifest(run_dir: str | Path, manifest: dict) -> Path:
    """Write ``manifest.json`` into a run directory (keys sorted)."""
    path = Path(run_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as file:
        json.dump(manifest, file, indent=2, sort_keys=True)
        file.write("\n")
    return path
