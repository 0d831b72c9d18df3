"""Experiment configuration files.

A configuration is flat ``key = value`` text. ``#`` starts a comment, repeated keys
keep the last value, and ``include = other.cfg`` splices in another file (resolved
relative to the including file). Path values are resolved relative to the file
they appear in.

Example::

    mode = density
    treebank_family = google
    target = es
    sources = fr, it, pt
    treebank.fr = data/fr-train.conllu
    test = data/es-test.conllu
    parallel.fr.source = data/fr-es.fr.conllu
    parallel.fr.target = data/fr-es.es.conllu
    tiers = 100, 90, 80, 70
    seed = 1
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from crossparse.exception import DataError, UsageError
from crossparse.transfer import TransferConfig

logger = logging.getLogger(__name__)

MODES = ("delex-baseline", "delex+selftrain", "clusters", "lexicalized", "density")

# Per treebank family: (exclude_punct, wals_threshold) defaults.
TREEBANK_FAMILIES = {"google": (True, 4), "ud": (False, 5)}
DEFAULT_TREEBANK_FAMILY = "ud"

_PATH_KEYS = re.compile(
    r"^(treebank\.\w+|monolingual\.\w+|parallel\.\w+\.(source|target)|alignment\.\w+"
    r"|test|target_corpus|wals|clusters|mono_clusters)$"
)
_SCALAR_KEYS = {
    "mode", "target", "sources", "exclude_punct", "wals_threshold", "tiers", "epochs",
    "beam_width", "alpha", "seed", "num_clusters", "ibm1_iterations", "max_len", "update",
    "threads", "min_count", "treebank_family",
}
_TRANSFER_KEYS = {
    "wals_threshold": int,
    "epochs": int,
    "beam_width": int,
    "alpha": float,
    "seed": int,
    "num_clusters": int,
    "ibm1_iterations": int,
    "max_len": int,
    "update": str,
    "threads": int,
}


def strtobool(val: str) -> int:
    """Convert a string representation of truth to 1 or 0.

    Args:
        val: 'y', 'yes', 't', 'true', 'on', '1' for True and 'n', 'no', 'f',
            'false', 'off', '0' for False (case-insensitive).

    Raises:
        ValueError: If val is not a recognized truth value.

    Example:
        >>> strtobool("yes")
        1
    """
    val = val.lower()
    if val in ("y", "yes", "t", "true", "on", "1"):
        return 1
    elif val in ("n", "no", "f", "false", "off", "0"):
        return 0
    else:
        raise ValueError(f"invalid truth value {val}")


def read_config(path: str | Path, _seen: tuple[Path, ...] = ()) -> dict[str, str]:
    """Read a configuration file into a flat key -> value map.

    Raises:
        UsageError: Malformed line, unknown key or include cycle.
        DataError: The file (or an included one) does not exist.
    """
    path = Path(path).resolve()
    if path in _seen:
        raise UsageError(f"include cycle through {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"{path.name}:{line_no}: expected 'key = value'")
        if key == "include":
            values.update(read_config(path.parent / value, _seen + (path,)))
        elif _PATH_KEYS.match(key):
            values[key] = str((path.parent / value).resolve())
        elif key in _SCALAR_KEYS:
            values[key] = value
        else:
            raise UsageError(f"{path.name}:{line_no}: unknown config key {key!r}")
    return values


def _split(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


@dataclass
class ExperimentConfig:
    """One end-to-end transfer experiment.

    Attributes:
        mode: One of `MODES`.
        target: Target language code.
        sources: Source language codes; empty means "select by WALS".
        treebanks: Source treebank (CoNLL-U) per language.
        test: Gold target treebank for evaluation.
        target_corpus: POS-tagged, unparsed target sentences (CoNLL-U) for
            self-training.
        monolingual: Tokenized raw text per language for clustering.
        parallel: (source side, target side) POS-tagged CoNLL-U per source language.
        alignments: Pharaoh links per source language (skips the built-in aligner).
        wals: WALS CSV export.
        clusters: Pre-built cross-lingual cluster file.
        mono_clusters: Pre-built monolingual target cluster file.
        treebank_family: ``google`` or ``ud``; picks the defaults of
            ``exclude_punct`` (on, off) and the WALS threshold (4, 5).
        exclude_punct: Leave punctuation out of scoring.
        min_count: Minimum frequency of clustered words.
        transfer: Trainer settings.
    """

    mode: str
    target: str
    sources: list[str] = field(default_factory=list)
    treebanks: dict[str, Path] = field(default_factory=dict)
    test: Path | None = None
    target_corpus: Path | None = None
    monolingual: dict[str, Path] = field(default_factory=dict)
    parallel: dict[str, tuple[Path, Path]] = field(default_factory=dict)
    alignments: dict[str, Path] = field(default_factory=dict)
    wals: Path | None = None
    clusters: Path | None = None
    mono_clusters: Path | None = None
    treebank_family: str = DEFAULT_TREEBANK_FAMILY
    exclude_punct: bool = False
    min_count: int = 1
    transfer: TransferConfig = field(default_factory=TransferConfig)

    @classmethod
    def from_values(cls, values: dict[str, str]) -> "ExperimentConfig":
        """Build (and validate) a configuration from `read_config` output."""
        try:
            mode = values["mode"].lstrip("+")
            target = values["target"]
        except KeyError as e:
            raise UsageError(f"config lacks required key {e.args[0]!r}") from None
        parallel_sides: dict[str, dict[str, Path]] = {}
        grouped: dict[str, dict[str, Path]] = {"treebank": {}, "monolingual": {}, "alignment": {}}
        for key, value in values.items():
            parts = key.split(".")
            if parts[0] in grouped and len(parts) == 2:
                grouped[parts[0]][parts[1]] = Path(value)
            elif parts[0] == "parallel":
                parallel_sides.setdefault(parts[1], {})[parts[2]] = Path(value)
        parallel = {}
        for language, sides in parallel_sides.items():
            if set(sides) != {"source", "target"}:
                raise UsageError(f"parallel data for {language} needs both source and target")
            parallel[language] = (sides["source"], sides["target"])
        family = values.get("treebank_family", DEFAULT_TREEBANK_FAMILY)
        if family not in TREEBANK_FAMILIES:
            expected = ", ".join(TREEBANK_FAMILIES)
            raise UsageError(f"unknown treebank_family {family!r}; expected one of {expected}")
        punct_default, threshold_default = TREEBANK_FAMILIES[family]

        try:
            settings = {
                name: convert(values[name])
                for name, convert in _TRANSFER_KEYS.items()
                if name in values
            }
            settings.setdefault("wals_threshold", threshold_default)
            if "tiers" in values:
                settings["tiers"] = tuple(int(t) for t in _split(values["tiers"]))
            transfer = TransferConfig(**settings)
            exclude_punct = (
                bool(strtobool(values["exclude_punct"]))
                if "exclude_punct" in values
                else punct_default
            )
            min_count = int(values.get("min_count", "1"))
        except ValueError as e:
            raise UsageError(f"invalid config value: {e}") from None

        optional = {
            key: Path(values[key]) if key in values else None
            for key in ("test", "target_corpus", "wals", "clusters", "mono_clusters")
        }
        config = cls(
            mode=mode,
            target=target,
            sources=_split(values.get("sources", "")),
            treebanks=grouped["treebank"],
            monolingual=grouped["monolingual"],
            parallel=parallel,
            alignments=grouped["alignment"],
            treebank_family=family,
            exclude_punct=exclude_punct,
            min_count=min_count,
            transfer=transfer,
            **optional,
        )
        config.validate()
        return config

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_values(read_config(path))

    def validate(self) -> None:
        """Check that the mode's inputs are present before anything runs.

        Raises:
            UsageError: Unknown mode or a missing required input.
            DataError: A configured file does not exist.
        """
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if not self.sources and self.wals is None:
            raise UsageError("no sources given and no WALS file to select them")
        missing = [s for s in self.sources if s not in self.treebanks]
        if missing:
            raise UsageError(f"no treebank for source languages {missing}")
        if self.test is None:
            raise UsageError("config lacks the target test treebank 'test'")
        if self.mode == "delex+selftrain" and self.target_corpus is None:
            raise UsageError("mode delex+selftrain needs 'target_corpus'")
        candidates = self.sources or sorted(self.treebanks)
        if self.mode in ("lexicalized", "density"):
            lacking = [s for s in candidates if s not in self.parallel]
            if lacking:
                raise UsageError(f"mode {self.mode} needs parallel data for {lacking}")
        if self.mode == "clusters" and self.clusters is None:
            lacking = [s for s in candidates if s not in self.parallel]
            lacking += [lang for lang in [self.target, *candidates] if lang not in self.monolingual]
            if lacking:
                raise UsageError(
                    "mode clusters needs a cluster file or parallel and monolingual "
                    f"data: {lacking}"
                )
        for path in self.input_paths():
            if not path.exists():
                raise DataError(f"input file not found: {path}")

    def input_paths(self) -> list[Path]:
        """Every file the experiment reads, in a stable order."""
        paths = [*self.treebanks.values(), *self.monolingual.values(), *self.alignments.values()]
        for source, target in self.parallel.values():
            paths += [source, target]
        optional = (self.test, self.target_corpus, self.wals, self.clusters, self.mono_clusters)
        paths += [p for p in optional if p]
        return sorted(set(paths))
