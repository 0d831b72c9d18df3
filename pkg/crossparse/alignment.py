"""Word alignment and translation-lexicon extraction.

IBM Model 1 (with a NULL source token) is trained by EM in both directions; each
direction is Viterbi-aligned and the two link sets are intersected. The lexicon
maps each source word to the target word it is most often aligned to.
"""

import io
import logging
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TextIO

from tqdm import tqdm

from crossparse.exception import AlignmentError, UsageError

logger = logging.getLogger(__name__)

NULL = "<NULL>"
DIRECTIONS = ("forward", "reverse")
MAX_SENTENCE_LENGTH = 100

Links = frozenset[tuple[int, int]]
SentencePair = tuple[list[str], list[str]]


@dataclass(frozen=True)
class AlignedPair:
    """A sentence pair with 0-based (source index, target index) links."""

    source: tuple[str, ...]
    target: tuple[str, ...]
    links: Links = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "target", tuple(self.target))
        object.__setattr__(self, "links", frozenset(self.links))
        for i, j in self.links:
            if not (0 <= i < len(self.source) and 0 <= j < len(self.target)):
                raise AlignmentError(
                    f"link {i}-{j} out of bounds for a {len(self.source)}x{len(self.target)} pair"
                )


@dataclass
class TranslationTable:
    """IBM Model 1 parameters p(target | source), one row per source word.

    ``direction`` records whether the table was trained source->target
    ("forward") or target->source ("reverse").
    """

    probs: dict[str, dict[str, float]] = field(default_factory=dict)
    direction: str = "forward"

    def prob(self, target: str, source: str) -> float:
        return self.probs.get(source, {}).get(target, 0.0)


def _oriented(pair: SentencePair | AlignedPair, direction: str) -> SentencePair:
    if isinstance(pair, AlignedPair):
        source, target = list(pair.source), list(pair.target)
    else:
        source, target = list(pair[0]), list(pair[1])
    return (source, target) if direction == "forward" else (target, source)


def _expected_counts(
    table: dict[str, dict[str, float]], pairs: Sequence[SentencePair]
) -> dict[str, Counter]:
    counts: dict[str, Counter] = {}
    for source, target in pairs:
        sources = [NULL] + source
        for word in target:
            denominator = sum(table[s][word] for s in sources)
            for s in sources:
                counts.setdefault(s, Counter())[word] += table[s][word] / denominator
    return counts


def _chunks(items: Sequence, count: int) -> list[Sequence]:
    size = max(1, math.ceil(len(items) / count))
    return [items[i : i + size] for i in range(0, len(items), size)]


def train_ibm1(
    corpus: Sequence[SentencePair | AlignedPair],
    iterations: int = 5,
    direction: str = "forward",
    threads: int = 1,
) -> TranslationTable:
    """EM training of IBM Model 1 with a NULL source token.

    Each source word's distribution starts uniform over the target words it
    co-occurs with. With ``threads`` > 1 the expectation step runs over contiguous
    chunks of the corpus and the chunk counts are summed in chunk order.

    Args:
        corpus: Sentence pairs (source tokens, target tokens).
        iterations: Number of EM iterations.
        direction: ``"reverse"`` trains p(source word | target word).
        threads: Worker threads for the expectation step.

    Raises:
        UsageError: ``iterations`` < 1 or unknown direction.
        AlignmentError: The corpus is empty.
    """
    if iterations < 1:
        raise UsageError(f"IBM Model 1 needs at least one iteration, got {iterations}")
    if direction not in DIRECTIONS:
        raise UsageError(f"unknown alignment direction {direction!r}")
    pairs = [_oriented(pair, direction) for pair in corpus]
    if not pairs:
        raise AlignmentError("cannot align an empty parallel corpus")

    cooccurring: dict[str, set[str]] = {}
    for source, target in pairs:
        for s in [NULL] + source:
            cooccurring.setdefault(s, set()).update(target)
    table = {
        s: {t: 1.0 / len(targets) for t in sorted(targets)}
        for s, targets in cooccurring.items()
        if targets
    }
    for s in cooccurring:
        table.setdefault(s, {})

    show = logger.isEnabledFor(logging.INFO)
    chunks = _chunks(pairs, threads)
    for _ in tqdm(range(iterations), desc=f"ibm1 {direction}", disable=not show):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                partials = list(pool.map(lambda chunk: _expected_counts(table, chunk), chunks))
        else:
            partials = [_expected_counts(table, pairs)]
        counts: dict[str, Counter] = {}
        for partial in partials:
            for s, row in partial.items():
                counts.setdefault(s, Counter()).update(row)
        table = {}
        for s, row in counts.items():
            total = sum(row.values())
            table[s] = {t: c / total for t, c in row.items()}
        for s in cooccurring:
            table.setdefault(s, {})
    return TranslationTable(table, direction)


def log_likelihood(table: TranslationTable, corpus: Sequence[SentencePair | AlignedPair]) -> float:
    """Corpus log-likelihood under the table (length terms dropped)."""
    total = 0.0
    for pair in corpus:
        source, target = _oriented(pair, table.direction)
        sources = [NULL] + source
        for word in target:
            p = sum(table.prob(word, s) for s in sources) / len(sources)
            total += math.log(p) if p > 0 else -math.inf
    return total


def viterbi_align(table: TranslationTable, pair: SentencePair | AlignedPair) -> Links:
    """Most probable link per word, in (source index, target index) orientation.

    For a forward table every target word links to its argmax source word; for a
    reverse table every source word links to its argmax target word. NULL wins
    only when strictly more probable than every real word (no link then); ties
    between real words go to the lowest index.
    """
    source, target = _oriented(pair, table.direction)
    links = set()
    for j, word in enumerate(target):
        best, best_p = None, -1.0
        for i, s in enumerate(source):
            p = table.prob(word, s)
            if p > best_p:
                best, best_p = i, p
        if best is None or table.prob(word, NULL) > best_p:
            continue
        links.add((best, j) if table.direction == "forward" else (j, best))
    return frozenset(links)


def intersect(forward: Iterable[tuple[int, int]], reverse: Iterable[tuple[int, int]]) -> Links:
    """Links present in both directions (both in (source, target) orientation)."""
    return frozenset(forward) & frozenset(reverse)


def symmetrize(
    corpus: Sequence[SentencePair], iterations: int = 5, threads: int = 1
) -> list[AlignedPair]:
    """Train both directions, Viterbi-align both and keep the intersected links."""
    forward = train_ibm1(corpus, iterations, "forward", threads)
    reverse = train_ibm1(corpus, iterations, "reverse", threads)
    aligned = []
    for pair in corpus:
        links = intersect(viterbi_align(forward, pair), viterbi_align(reverse, pair))
        aligned.append(AlignedPair(pair[0], pair[1], links))
    logger.info(
        "aligned %i sentence pairs, %i intersected links",
        len(aligned),
        sum(len(pair.links) for pair in aligned),
    )
    return aligned


@dataclass
class TranslationLexicon:
    """Source word -> most frequently aligned target word, with the full counts.

    Ties on the count go to the lexicographically smallest target word.
    """

    src_lang: str
    tgt_lang: str
    counts: dict[str, Counter] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.counts)

    def __contains__(self, word: str) -> bool:
        return word in self.counts

    def best(self, word: str) -> tuple[str, int] | None:
        row = self.counts.get(word)
        if not row:
            return None
        target, count = min(row.items(), key=lambda item: (-item[1], item[0]))
        return target, count

    def lookup(self, word: str) -> str | None:
        """The translation of ``word``, or None (NULL) if it was never aligned."""
        best = self.best(word)
        return None if best is None else best[0]

    @property
    def entries(self) -> dict[str, tuple[str, int]]:
        return {word: self.best(word) for word in sorted(self.counts)}


def extract_lexicon(
    aligned: Iterable[AlignedPair],
    src_lang: str,
    tgt_lang: str,
    max_len: int = MAX_SENTENCE_LENGTH,
) -> TranslationLexicon:
    """Count aligned word pairs over the intersected links.

    Pairs where either side has more than ``max_len`` tokens are skipped entirely.
    """
    lexicon = TranslationLexicon(src_lang, tgt_lang)
    skipped = 0
    for pair in aligned:
        if len(pair.source) > max_len or len(pair.target) > max_len:
            skipped += 1
            continue
        for i, j in sorted(pair.links):
            lexicon.counts.setdefault(pair.source[i], Counter())[pair.target[j]] += 1
    if skipped:
        logger.info("skipped %i sentence pairs longer than %i tokens", skipped, max_len)
    return lexicon


def compose_lexicons(first: TranslationLexicon, second: TranslationLexicon) -> TranslationLexicon:
    """Translate through a pivot language: ``second(first(w))``.

    The composed count of an entry is the count of its first leg.

    Raises:
        AlignmentError: ``first`` does not translate into ``second``'s source language.
    """
    if first.tgt_lang != second.src_lang:
        raise AlignmentError(
            f"cannot pivot {first.src_lang}->{first.tgt_lang} through {second.src_lang}"
        )
    composed = TranslationLexicon(first.src_lang, second.tgt_lang)
    for word in sorted(first.counts):
        pivot, count = first.best(word)
        translation = second.lookup(pivot)
        if translation is not None:
            composed.counts[word] = Counter({translation: count})
    return composed


def reverse_pairs(aligned: Iterable[AlignedPair]) -> list[AlignedPair]:
    """Swap source and target sides (and link orientation)."""
    return [
        AlignedPair(pair.target, pair.source, frozenset((j, i) for i, j in pair.links))
        for pair in aligned
    ]


def write_lexicon(lexicon: TranslationLexicon, stream: TextIO) -> None:
    """``# src=xx tgt=yy`` header, then ``source TAB target TAB count`` lines."""
    stream.write(f"# src={lexicon.src_lang} tgt={lexicon.tgt_lang}\n")
    for word in sorted(lexicon.counts):
        for target, count in sorted(lexicon.counts[word].items()):
            stream.write(f"{word}\t{target}\t{count}\n")


def read_lexicon(stream: TextIO | str) -> TranslationLexicon:
    """Read a lexicon written by `write_lexicon`.

    Raises:
        AlignmentError: Missing header or malformed line.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline().strip()
    fields = dict(item.split("=", 1) for item in header.lstrip("# ").split() if "=" in item)
    if not header.startswith("#") or "src" not in fields or "tgt" not in fields:
        raise AlignmentError("lexicon file lacks a '# src=.. tgt=..' header")
    lexicon = TranslationLexicon(fields["src"], fields["tgt"])
    for line_no, line in enumerate(stream, start=2):
        line = line.rstrip("\r\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not parts[2].isdigit():
            raise AlignmentError(f"line {line_no}: malformed lexicon entry {line!r}")
        lexicon.counts.setdefault(parts[0], Counter())[parts[1]] += int(parts[2])
    return lexicon


def read_parallel(source: TextIO | str, target: TextIO | str) -> list[SentencePair]:
    """Pair two tokenized files line by line.

    Raises:
        AlignmentError: The files have different numbers of lines.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    if isinstance(target, str):
        target = io.StringIO(target)
    sources = [line.split() for line in source.read().splitlines()]
    targets = [line.split() for line in target.read().splitlines()]
    if len(sources) != len(targets):
        raise AlignmentError(
            f"parallel files differ in length: {len(sources)} vs {len(targets)} lines"
        )
    return list(zip(sources, targets, strict=True))


def read_pharaoh(
    stream: TextIO | str, pairs: Sequence[SentencePair] | None = None
) -> list[Links]:
    """Read ``i-j`` links, one line per sentence pair.

    Args:
        stream: Pharaoh-format text.
        pairs: The tokenized sentence pairs the links refer to; enables bounds checks.

    Raises:
        AlignmentError: Malformed link, index out of bounds, or line count differing
            from ``pairs``.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = stream.read().splitlines()
    if pairs is not None and len(lines) != len(pairs):
        raise AlignmentError(f"{len(lines)} alignment lines for {len(pairs)} sentence pairs")
    result = []
    for line_no, line in enumerate(lines, start=1):
        links = set()
        for item in line.split():
            i, sep, j = item.partition("-")
            if not sep or not i.isdigit() or not j.isdigit():
                raise AlignmentError(f"line {line_no}: malformed link {item!r}")
            links.add((int(i), int(j)))
        if pairs is not None:
            source, target = pairs[line_no - 1]
            for i, j in sorted(links):
                if i >= len(source) or j >= len(target):
                    raise AlignmentError(
                        f"line {line_no}: link {i}-{j} out of bounds "
                        f"({len(source)} source, {len(target)} target tokens)"
                    )
        result.append(frozenset(links))
    return result


def write_pharaoh(links: Iterable[Iterable[tuple[int, int]]], stream: TextIO) -> None:
    for sentence_links in links:
        stream.write(" ".join(f"{i}-{j}" for i, j in sorted(sentence_links)) + "\n")
