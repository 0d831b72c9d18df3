"""Hierarchical word clustering.

Brown clustering builds a binary merge tree over word classes; each word's cluster
is the bit-string path from the root (left = 0, right = 1) to its leaf class. A
code-switched corpus (words randomly replaced by dictionary translations into other
languages) clustered this way puts translations into shared clusters.

Classes:
    Clustering: word -> bit-string map with prefix lookups.
    CodeSwitchSpec: Inputs of the code-switched corpus generator.
    CodeSwitchCorpus: The mixed corpus plus replacement statistics.

Functions:
    generate_codeswitch: Build the mixed corpus.
    brown_cluster: Agglomerative Brown clustering.
    read_clusters / write_clusters: ``bitstring TAB word TAB count`` files.
"""

import io
import logging
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, TextIO

import numpy as np
from tqdm import tqdm

from crossparse.exception import ClusterFormatError, DataError
from crossparse.helper import make_rng, normalize_word
from crossparse.treebank import MonolingualCorpus

if TYPE_CHECKING:
    from crossparse.alignment import TranslationLexicon

logger = logging.getLogger(__name__)


@dataclass
class Clustering:
    """A hierarchical clustering: word -> bit-string path in a binary merge tree.

    Attributes:
        paths: Full bit-string per word.
        counts: Word frequencies in the clustered corpus.
        lowercase: Lookups lowercase the query word.
        digits: Lookups map digits to ``0``.
    """

    paths: dict[str, str]
    counts: dict[str, int] = field(default_factory=dict)
    lowercase: bool = False
    digits: bool = False

    def __len__(self) -> int:
        return len(self.paths)

    def __contains__(self, word: str) -> bool:
        return self.lookup(word) is not None

    @property
    def num_clusters(self) -> int:
        """Number of leaf clusters (K)."""
        return len(set(self.paths.values()))

    def lookup(self, word: str, level: int | None = None) -> str | None:
        """Cluster path of ``word`` (cut to ``level`` bits), or None if unclustered."""
        path = self.paths.get(normalize_word(word, self.lowercase, self.digits))
        if path is None or level is None:
            return path
        from crossparse.features import cluster_prefix

        return cluster_prefix(path, level)

    def words_at(self, prefix: str) -> list[str]:
        """Words whose path starts with ``prefix``, sorted."""
        return sorted(word for word, path in self.paths.items() if path.startswith(prefix))


@dataclass
class CodeSwitchSpec:
    """Inputs of the code-switched corpus generator.

    Attributes:
        corpora: Monolingual corpus per language code.
        lexicons: Translation lexicon per ordered language pair (i, j), i != j.
        alpha: Replacement probability per token.
        seed: Seed of the PCG64 generator.
    """

    corpora: Mapping[str, MonolingualCorpus]
    lexicons: Mapping[tuple[str, str], "TranslationLexicon"]
    alpha: float = 0.3
    seed: int = 1


@dataclass
class CodeSwitchCorpus(MonolingualCorpus):
    """The mixed corpus, with replacement counts per target language."""

    replacements: dict[str, int] = field(default_factory=dict)
    draws: int = 0
    seed: int = 0
    alpha: float = 0.0

    @property
    def header(self) -> str:
        return f"seed={self.seed} alpha={self.alpha}"


def generate_codeswitch(spec: CodeSwitchSpec) -> CodeSwitchCorpus:
    """Concatenate the corpora, replacing words by translations with probability α.

    Languages are visited in code order. For every token a uniform draw in [0, 1)
    below α picks one of the other languages uniformly and replaces the token by its
    translation, unless the lexicon has none (NULL).

    Raises:
        DataError: A lexicon for an ordered language pair is missing, or α is
            outside [0, 1].
    """
    if not 0.0 <= spec.alpha <= 1.0:
        raise DataError(f"alpha must lie in [0, 1], got {spec.alpha}")
    languages = sorted(spec.corpora)
    for source in languages:
        for target in languages:
            if source != target and (source, target) not in spec.lexicons:
                raise DataError(f"missing lexicon for {source}->{target}")
    rng = make_rng(spec.seed)
    replacements = Counter({language: 0 for language in languages})
    draws = 0
    mixed: list[list[str]] = []
    for source in languages:
        others = [language for language in languages if language != source]
        for sentence in spec.corpora[source]:
            switched = list(sentence)
            for position, word in enumerate(sentence):
                if rng.random() >= spec.alpha or not others:
                    continue
                target = others[int(rng.integers(len(others)))]
                draws += 1
                translation = spec.lexicons[(source, target)].lookup(word)
                if translation is not None:
                    switched[position] = translation
                    replacements[target] += 1
            mixed.append(switched)
    logger.info(
        "code-switched %i sentences, %i of %i tokens replaced",
        len(mixed),
        sum(replacements.values()),
        sum(len(s) for s in mixed),
    )
    return CodeSwitchCorpus(
        mixed,
        "+".join(languages),
        replacements=dict(replacements),
        draws=draws,
        seed=spec.seed,
        alpha=spec.alpha,
    )


@dataclass
class MergeStep:
    """One merge of the agglomeration: its MI loss and the MI before and after."""

    loss: float
    runner_up: float | None
    mi_before: float
    mi_after: float
    hierarchical: bool


def _q(x: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        values = x * np.log(x / (left * right))
    return np.where(x > 0, values, 0.0)


class _Agglomeration:
    """Cluster bigram counts over a set of active slots."""

    def __init__(self, capacity: int, total: float):
        self.counts = np.zeros((capacity, capacity))
        self.active: list[int] = []
        self.free = list(range(capacity - 1, -1, -1))
        self.total = total

    def add(self, row: np.ndarray, column: np.ndarray, self_count: float) -> int:
        slot = self.free.pop()
        self.counts[slot, :] = row
        self.counts[:, slot] = column
        self.counts[slot, slot] = self_count
        self.active.append(slot)
        self.active.sort()
        return slot

    def mutual_information(self) -> float:
        idx = np.array(self.active)
        p = self.counts[np.ix_(idx, idx)] / self.total
        return float(_q(p, p.sum(1)[:, None], p.sum(0)[None, :]).sum())

    def best_merge(self) -> tuple[int, int, float, float | None]:
        """Slots (a, b) whose merge loses the least MI; ties go to the lowest pair."""
        idx = np.array(self.active)
        size = len(idx)
        p = self.counts[np.ix_(idx, idx)] / self.total
        pl = p.sum(1)
        pr = p.sum(0)
        q = _q(p, pl[:, None], pr[None, :])
        row_q = q.sum(1)
        col_q = q.sum(0)
        best: tuple[float, int, int] | None = None
        losses = []
        for a in range(size - 1):
            b = np.arange(a + 1, size)
            before = (
                row_q[a] + row_q[b] + col_q[a] + col_q[b]
                - q[a, a] - q[a, b] - q[b, a] - q[b, b]
            )
            mask = np.ones((len(b), size))
            mask[:, a] = 0.0
            mask[np.arange(len(b)), b] = 0.0
            merged_left = pl[a] + pl[b]
            merged_right = pr[a] + pr[b]
            rows = (p[a, :][None, :] + p[b, :]) * mask
            cols = (p[:, a][None, :] + p[:, b].T) * mask
            after = (
                _q(rows, merged_left[:, None], pr[None, :]).sum(1)
                + _q(cols, pl[None, :], merged_right[:, None]).sum(1)
                + _q(p[a, a] + p[a, b] + p[b, a] + p[b, b], merged_left, merged_right)
            )
            loss = np.round(before - after, 12)
            losses.extend(loss.tolist())
            k = int(np.argmin(loss))
            if best is None or loss[k] < best[0]:
                best = (float(loss[k]), a, int(b[k]))
        assert best is not None
        ordered = sorted(losses)
        runner_up = ordered[1] if len(ordered) > 1 else None
        return int(idx[best[1]]), int(idx[best[2]]), best[0], runner_up

    def merge(self, a: int, b: int) -> None:
        self.counts[a, :] += self.counts[b, :]
        self.counts[:, a] += self.counts[:, b]
        self.counts[b, :] = 0.0
        self.counts[:, b] = 0.0
        self.active.remove(b)
        self.free.append(b)


def _normalized(corpus: Iterable[Sequence[str]], lowercase: bool, digits: bool) -> list[list[str]]:
    return [[normalize_word(w, lowercase, digits) for w in sentence] for sentence in corpus]


def brown_cluster(
    corpus: MonolingualCorpus | Iterable[Sequence[str]],
    num_clusters: int = 500,
    min_count: int = 1,
    exact: bool = False,
    lowercase: bool = False,
    digits: bool = False,
    trace: list[MergeStep] | None = None,
) -> Clustering:
    """Agglomerative Brown clustering over adjacent-word bigrams.

    Word types with at least ``min_count`` occurrences are sorted by frequency
    (ties by string). The first K types start as singleton classes; every further
    type enters as a new class and the pair of classes whose merge loses the least
    class-bigram mutual information is merged, keeping K classes. The K classes are
    then merged down to one, which builds the tree the bit-strings are read from.
    With ``exact=True`` all types start as classes and the same greedy merging runs
    over the full vocabulary.

    Args:
        corpus: Tokenized sentences.
        num_clusters: K, the number of leaf classes; clamped to the vocabulary size.
        min_count: Types rarer than this are left unclustered.
        exact: Merge over the full vocabulary instead of a K+1 window.
        lowercase: Lowercase words first.
        digits: Map digits to ``0`` first.
        trace: If given, receives one `MergeStep` per merge.

    Raises:
        ValueError: ``num_clusters`` < 2.
        DataError: No word type reaches ``min_count``.
    """
    if num_clusters < 2:
        raise ValueError(f"need at least 2 clusters, got {num_clusters}")
    sentences = _normalized(corpus, lowercase, digits)
    counts = Counter(word for sentence in sentences for word in sentence)
    vocab = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    if not vocab:
        raise DataError("no word type reaches the minimum count")
    kept_counts = {word: counts[word] for word in vocab}
    if len(vocab) == 1:
        return Clustering({vocab[0]: "0"}, kept_counts, lowercase, digits)
    if num_clusters > len(vocab):
        logger.warning("K=%i exceeds %i word types, clamping", num_clusters, len(vocab))
        num_clusters = len(vocab)

    word_id = {word: i for i, word in enumerate(vocab)}
    bigrams: Counter[tuple[int, int]] = Counter()
    for sentence in sentences:
        for left, right in zip(sentence, sentence[1:], strict=False):
            if left in word_id and right in word_id:
                bigrams[(word_id[left], word_id[right])] += 1
    outgoing: dict[int, list[tuple[int, int]]] = {}
    incoming: dict[int, list[tuple[int, int]]] = {}
    for (left, right), count in bigrams.items():
        outgoing.setdefault(left, []).append((right, count))
        incoming.setdefault(right, []).append((left, count))
    total = float(sum(bigrams.values())) or 1.0

    window = len(vocab) if exact else num_clusters
    agglomeration = _Agglomeration(window + 1, total)
    slot_of_word: dict[int, int] = {}
    members: dict[int, list[int]] = {}

    def enter(word: int) -> None:
        capacity = agglomeration.counts.shape[0]
        row = np.zeros(capacity)
        column = np.zeros(capacity)
        self_count = 0.0
        for other, count in outgoing.get(word, []):
            if other == word:
                self_count += count
            elif other in slot_of_word:
                row[slot_of_word[other]] += count
        for other, count in incoming.get(word, []):
            if other != word and other in slot_of_word:
                column[slot_of_word[other]] += count
        slot = agglomeration.add(row, column, self_count)
        slot_of_word[word] = slot
        members[slot] = [word]

    def merge_best(hierarchical: bool) -> tuple[int, int]:
        mi_before = agglomeration.mutual_information() if trace is not None else 0.0
        a, b, loss, runner_up = agglomeration.best_merge()
        agglomeration.merge(a, b)
        if trace is not None:
            trace.append(
                MergeStep(
                    loss, runner_up, mi_before, agglomeration.mutual_information(), hierarchical
                )
            )
        return a, b

    show = logger.isEnabledFor(logging.INFO)
    for word in range(window):
        enter(word)
    if exact:
        while len(agglomeration.active) > num_clusters:
            a, b = merge_best(hierarchical=False)
            _absorb(members, slot_of_word, a, b)
    else:
        for word in tqdm(range(window, len(vocab)), desc="brown", disable=not show):
            enter(word)
            a, b = merge_best(hierarchical=False)
            _absorb(members, slot_of_word, a, b)

    # Binary tree over the K leaf classes: node -> (left child, right child).
    node_of_slot = {slot: ("leaf", slot) for slot in agglomeration.active}
    leaf_words = {slot: list(words) for slot, words in members.items()}
    children: dict[tuple, tuple[tuple, tuple]] = {}
    next_node = 0
    while len(agglomeration.active) > 1:
        a, b = merge_best(hierarchical=True)
        node = ("node", next_node)
        next_node += 1
        children[node] = (node_of_slot[a], node_of_slot.pop(b))
        node_of_slot[a] = node
    root = node_of_slot[agglomeration.active[0]]

    paths: dict[str, str] = {}
    pending = [(root, "")]
    while pending:
        node, path = pending.pop()
        if node[0] == "leaf":
            for word in leaf_words[node[1]]:
                paths[vocab[word]] = path or "0"
            continue
        left, right = children[node]
        pending.append((left, path + "0"))
        pending.append((right, path + "1"))
    logger.info("clustered %i word types into %i classes", len(paths), num_clusters)
    return Clustering(paths, kept_counts, lowercase, digits)


def _absorb(members: dict[int, list[int]], slot_of_word: dict[int, int], a: int, b: int) -> None:
    for word in members.pop(b):
        slot_of_word[word] = a
        members[a].append(word)


def read_clusters(
    stream: TextIO | str, lowercase: bool = False, digits: bool = False
) -> Clustering:
    """Read ``bitstring TAB word TAB count`` lines (the Brown-cluster tool layout).

    Raises:
        ClusterFormatError: Malformed line or duplicate word, naming the line.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    paths: dict[str, str] = {}
    counts: dict[str, int] = {}
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ClusterFormatError(
                f"expected 3 tab-separated fields, found {len(fields)}", line_no
            )
        bits, word, count = fields
        if not bits or set(bits) - {"0", "1"}:
            raise ClusterFormatError(f"invalid bit-string {bits!r}", line_no)
        if word in paths:
            raise ClusterFormatError(f"duplicate word {word!r}", line_no)
        try:
            counts[word] = int(count)
        except ValueError:
            raise ClusterFormatError(f"non-integer count {count!r}", line_no) from None
        paths[word] = bits
    return Clustering(paths, counts, lowercase, digits)


def write_clusters(clustering: Clustering, stream: TextIO) -> None:
    """Write a clustering as ``bitstring TAB word TAB count`` lines, sorted by path."""
    for word, path in sorted(clustering.paths.items(), key=lambda item: (item[1], item[0])):
        stream.write(f"{path}\t{word}\t{clustering.counts.get(word, 0)}\n")
