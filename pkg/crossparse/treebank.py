"""Treebank and corpus I/O.

This module houses the sentence and tree types shared by every other module and
reads/writes the two text formats the toolkit exchanges: CoNLL-U treebanks and
whitespace-tokenized monolingual corpora.

Classes:
    Token: One syntactic word with its universal POS tag and optional arc.
    Sentence: An ordered list of tokens in one language.
    Treebank: A list of sentences sharing a language code.
    PartialTree: A projected sentence whose heads may be partly missing.
    MonolingualCorpus: Tokenized raw text for one language.

Functions:
    read_conllu / write_conllu: CoNLL-U (and CoNLL-X) treebank I/O.
    is_projective / validate_tree: Tree checks.
    read_tokenized_corpus / write_tokenized_corpus: One-sentence-per-line text.
"""

import io
import logging
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import TextIO

from crossparse.exception import TreebankFormatError, TreeError

logger = logging.getLogger(__name__)

ROOT = 0

# Universal Dependencies v1 part-of-speech tags.
UD_TAGSET = frozenset(
    {
        "ADJ", "ADP", "ADV", "AUX", "CONJ", "DET", "INTJ", "NOUN", "NUM",
        "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    }
)
# Later UD releases renamed CONJ.
UPOS_ALIASES = {"CCONJ": "CONJ"}

ID, FORM, LEMMA, UPOS, XPOS, FEATS, HEAD, DEPREL, DEPS, MISC = range(10)
LEX_KEY = "Lex="


@dataclass
class Token:
    """One syntactic word.

    Attributes:
        index: 1-based position in the sentence.
        form: Surface string.
        upos: Universal POS tag.
        head: Head position (0 is the artificial ROOT), or None when unknown.
        deprel: Dependency label, or None when unknown.
        lexform: Form used by lexical features: the target-language translation of a
            source token, the form itself for a target token, None for NULL.
    """

    index: int
    form: str
    upos: str
    head: int | None = None
    deprel: str | None = None
    lexform: str | None = None


@dataclass
class Sentence:
    """An ordered list of tokens in one language."""

    tokens: list[Token]
    language: str = "und"
    comments: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __getitem__(self, index: int) -> Token:
        """Token at 1-based ``index``."""
        return self.tokens[index - 1]

    @classmethod
    def from_forms(
        cls,
        forms: Sequence[str],
        upos: Sequence[str],
        heads: Sequence[int | None] | None = None,
        labels: Sequence[str | None] | None = None,
        language: str = "und",
        lexforms: Sequence[str | None] | None = None,
    ) -> "Sentence":
        """Build a sentence from parallel column lists."""
        n = len(forms)
        heads = heads if heads is not None else [None] * n
        labels = labels if labels is not None else [None] * n
        lexforms = lexforms if lexforms is not None else [None] * n
        tokens = [
            Token(i + 1, forms[i], upos[i], heads[i], labels[i], lexforms[i]) for i in range(n)
        ]
        return cls(tokens, language)

    @property
    def forms(self) -> list[str]:
        return [token.form for token in self.tokens]

    @property
    def heads(self) -> list[int | None]:
        return [token.head for token in self.tokens]

    @property
    def labels(self) -> list[str | None]:
        return [token.deprel for token in self.tokens]

    def has_full_tree(self) -> bool:
        return all(token.head is not None for token in self.tokens)

    def copy(self) -> "Sentence":
        tokens = [replace(token) for token in self.tokens]
        return Sentence(tokens, self.language, list(self.comments))

    def with_arcs(self, heads: Sequence[int | None], labels: Sequence[str | None]) -> "Sentence":
        """Copy of the sentence with heads and labels replaced."""
        tokens = [
            replace(token, head=heads[i], deprel=labels[i]) for i, token in enumerate(self.tokens)
        ]
        return Sentence(tokens, self.language, list(self.comments))


@dataclass
class Treebank:
    """A list of sentences sharing a language code."""

    sentences: list[Sentence]
    language: str = "und"

    def __post_init__(self):
        for sentence in self.sentences:
            sentence.language = self.language

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, index: int) -> Sentence:
        return self.sentences[index]

    @property
    def token_count(self) -> int:
        return sum(len(sentence) for sentence in self.sentences)

    def projective_only(self) -> tuple["Treebank", int]:
        """Split off the sentences a static arc-eager oracle can train on.

        Returns:
            The treebank of complete projective sentences and the number skipped.
        """
        kept = [s for s in self.sentences if s.has_full_tree() and is_projective(s)]
        return Treebank(kept, self.language), len(self.sentences) - len(kept)


def concatenate(treebanks: Iterable[Treebank], language: str) -> Treebank:
    """Union of several treebanks (multi-source training), relabelled ``language``."""
    sentences = [sentence.copy() for treebank in treebanks for sentence in treebank]
    return Treebank(sentences, language)


@dataclass
class PartialTree:
    """A projected sentence whose heads may be partly missing.

    Attributes:
        sentence: The target sentence; tokens without a projected arc have head None.
        density: Exact fraction of tokens that have a head.
        full_projective: True iff every token has a head and the tree is projective.
    """

    sentence: Sentence
    density: Fraction
    full_projective: bool

    @classmethod
    def from_sentence(cls, sentence: Sentence) -> "PartialTree":
        n = len(sentence)
        attached = sum(1 for token in sentence if token.head is not None)
        density = Fraction(attached, n) if n else Fraction(0)
        full = n > 0 and attached == n and _is_tree(sentence) and is_projective(sentence)
        return cls(sentence, density, full)


@dataclass
class MonolingualCorpus:
    """Whitespace-tokenized raw text for one language."""

    sentences: list[list[str]]
    language: str = "und"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[list[str]]:
        return iter(self.sentences)

    @property
    def token_count(self) -> int:
        return sum(len(sentence) for sentence in self.sentences)


def _parse_index(value: str, line_no: int, column: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise TreebankFormatError(f"non-integer {column} {value!r}", line_no) from None


def _finish_sentence(
    rows: list[tuple[int, list[str]]], language: str, comments: list[str]
) -> Sentence:
    n = len(rows)
    tokens = []
    for position, (line_no, columns) in enumerate(rows, start=1):
        index = _parse_index(columns[ID], line_no, "ID")
        if index != position:
            raise TreebankFormatError(f"token id {index} out of sequence", line_no)
        head = None
        if columns[HEAD] != "_":
            head = _parse_index(columns[HEAD], line_no, "HEAD")
            if not 0 <= head <= n:
                raise TreebankFormatError(
                    f"head out of range: {head} (sentence length {n})", line_no
                )
            if head == index:
                raise TreebankFormatError(f"token {index} is its own head", line_no)
        deprel = None if columns[DEPREL] == "_" else columns[DEPREL]
        lexform = None
        for item in columns[MISC].split("|"):
            if item.startswith(LEX_KEY):
                lexform = item[len(LEX_KEY):]
        tokens.append(Token(index, columns[FORM], columns[UPOS], head, deprel, lexform))
    return Sentence(tokens, language, comments)


def read_conllu(
    stream: TextIO | str,
    language: str,
    tagset: frozenset[str] = UD_TAGSET,
    strict_upos: bool = False,
) -> Treebank:
    """Read a CoNLL-U (or CoNLL-X) treebank.

    Multiword-token ranges (``3-4``) and empty nodes (``5.1``) are skipped. ``_`` in
    HEAD or DEPREL gives an absent value. A ``Lex=<form>`` item in MISC restores the
    token's lexical form. ``CCONJ`` is read as ``CONJ``.

    Args:
        stream: Open text stream, or the document as a string.
        language: Language code stamped on every sentence.
        tagset: Allowed UPOS tags.
        strict_upos: Raise on tags outside ``tagset`` instead of warning.

    Returns:
        The treebank, one sentence per blank-line separated block.

    Raises:
        TreebankFormatError: Malformed column count, non-integer or out-of-range
            HEAD; the message names the line number.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    sentences: list[Sentence] = []
    rows: list[tuple[int, list[str]]] = []
    comments: list[str] = []
    unknown_tags: Counter[str] = Counter()
    line_no = 0
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if rows:
                sentences.append(_finish_sentence(rows, language, comments))
            rows, comments = [], []
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        columns = line.split("\t")
        if len(columns) != 10:
            raise TreebankFormatError(f"expected 10 columns, found {len(columns)}", line_no)
        if "-" in columns[ID] or "." in columns[ID]:
            continue
        columns[UPOS] = UPOS_ALIASES.get(columns[UPOS], columns[UPOS])
        if columns[UPOS] not in tagset:
            if strict_upos:
                raise TreebankFormatError(f"unknown UPOS tag {columns[UPOS]!r}", line_no)
            unknown_tags[columns[UPOS]] += 1
        rows.append((line_no, columns))
    if rows:
        sentences.append(_finish_sentence(rows, language, comments))
    if unknown_tags:
        logger.warning(
            "%i tokens carry tags outside the tagset: %s",
            sum(unknown_tags.values()),
            ", ".join(sorted(unknown_tags)),
        )
    return Treebank(sentences, language)


def format_conllu(treebank: Treebank | Iterable[Sentence]) -> str:
    """Render sentences as CoNLL-U text (columns the toolkit does not keep are ``_``)."""
    lines: list[str] = []
    for sentence in treebank:
        lines.extend(f"# {comment}" for comment in sentence.comments)
        for token in sentence:
            misc = "_" if token.lexform is None else f"{LEX_KEY}{token.lexform}"
            lines.append(
                "\t".join(
                    [
                        str(token.index),
                        token.form,
                        "_",
                        token.upos,
                        "_",
                        "_",
                        "_" if token.head is None else str(token.head),
                        token.deprel or "_",
                        "_",
                        misc,
                    ]
                )
            )
        lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


def write_conllu(treebank: Treebank | Iterable[Sentence], stream: TextIO) -> None:
    """Write sentences to ``stream`` in CoNLL-U layout."""
    stream.write(format_conllu(treebank))


def write_partial_trees(trees: Iterable[PartialTree], stream: TextIO) -> None:
    """Write projected trees as CoNLL-U with a ``# density=p/q`` comment each."""
    sentences = []
    for tree in trees:
        sentence = tree.sentence.copy()
        sentence.comments = [c for c in sentence.comments if not c.startswith("density=")]
        sentence.comments.append(f"density={tree.density}")
        sentences.append(sentence)
    write_conllu(sentences, stream)


def read_partial_trees(stream: TextIO | str, language: str) -> list[PartialTree]:
    """Read trees written by `write_partial_trees`; density is recomputed exactly."""
    return [PartialTree.from_sentence(s) for s in read_conllu(stream, language)]


def _is_tree(sentence: Sentence) -> bool:
    try:
        validate_tree(sentence, single_root=False)
    except TreeError:
        return False
    return True


def validate_tree(sentence: Sentence, single_root: bool = True) -> None:
    """Check that the head function forms a tree rooted at ROOT.

    Args:
        sentence: Sentence with every head present.
        single_root: Require exactly one token attached to ROOT.

    Raises:
        TreeError: Missing head, head out of range, self-loop, cycle, or (in
            single-root mode) a root count other than one.
    """
    n = len(sentence)
    heads = sentence.heads
    for index, head in enumerate(heads, start=1):
        if head is None:
            raise TreeError(f"token {index} has no head")
        if not 0 <= head <= n or head == index:
            raise TreeError(f"token {index} has invalid head {head}")
    roots = sum(1 for head in heads if head == ROOT)
    if single_root and roots != 1:
        raise TreeError(f"expected a single root, found {roots}")
    # Tokens already known to reach ROOT.
    reaches_root = [False] * (n + 1)
    reaches_root[ROOT] = True
    for start in range(1, n + 1):
        path = []
        seen = set()
        node = start
        while not reaches_root[node]:
            if node in seen:
                raise TreeError(f"cycle through token {node}")
            seen.add(node)
            path.append(node)
            node = heads[node - 1]
        for visited in path:
            reaches_root[visited] = True


def is_projective(sentence: Sentence) -> bool:
    """True iff no two arcs cross when drawn above the sentence (ROOT at 0).

    Checked through dominance: every token strictly between the ends of an arc must
    be a descendant of the arc's head.

    Raises:
        TreeError: A head is missing or the heads do not form a tree.
    """
    validate_tree(sentence, single_root=False)
    heads = [ROOT] + [token.head for token in sentence]

    def dominated_by(node: int, ancestor: int) -> bool:
        while node != ROOT:
            if node == ancestor:
                return True
            node = heads[node]
        return ancestor == ROOT

    for modifier in range(1, len(heads)):
        head = heads[modifier]
        low, high = min(head, modifier), max(head, modifier)
        for between in range(low + 1, high):
            if not dominated_by(between, head):
                return False
    return True


def read_tokenized_corpus(
    stream: TextIO | str, language: str, skip_comments: bool = False
) -> MonolingualCorpus:
    """Read one whitespace-tokenized sentence per line; empty lines are skipped.

    Args:
        stream: Open text stream, or the text itself.
        language: Language code of the corpus.
        skip_comments: Ignore lines starting with ``# `` (corpus headers).
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    sentences = []
    for line in stream:
        if skip_comments and line.startswith("# "):
            continue
        tokens = line.split()
        if tokens:
            sentences.append(tokens)
    return MonolingualCorpus(sentences, language)


def write_tokenized_corpus(
    corpus: MonolingualCorpus | Iterable[Sequence[str]], stream: TextIO, header: str | None = None
) -> None:
    """Write one space-joined sentence per line, optionally after a ``# header`` line."""
    if header is not None:
        stream.write(f"# {header}\n")
    for tokens in corpus:
        stream.write(" ".join(tokens) + "\n")
