"""Bundled synthetic fixtures.

Two toy languages share one POS grammar, ``NOUN VERB NOUN (ADP NOUN)``, and a
word-for-word dictionary. The prepositional phrase attaches to the verb when its
noun is an instrument and to the object noun when it is a possession, so the
attachment can only be resolved lexically (or through word clusters). Everything
is generated from a seed.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crossparse.helper import make_rng
from crossparse.treebank import (
    MonolingualCorpus,
    Sentence,
    Treebank,
    write_conllu,
    write_tokenized_corpus,
)

logger = logging.getLogger(__name__)

SOURCE_LANG = "xs"
TARGET_LANG = "xt"

AGENTS = {
    "dog": "kalu", "cat": "miro", "man": "tepa", "woman": "sunu", "child": "reko",
    "farmer": "pilo",
}
VERBS = {"sees": "vani", "holds": "doma", "paints": "keru", "finds": "lisa", "cleans": "nopi"}
INSTRUMENTS = {
    "knife": "baki", "brush": "fenu", "stick": "gora", "hammer": "hiku", "spoon": "jamo",
}
POSSESSIONS = {"hat": "mosu", "tail": "nira", "roof": "peko", "coat": "rada", "door": "sefi"}
ADPOSITIONS = {"with": "ko"}

DICTIONARY = {**AGENTS, **VERBS, **INSTRUMENTS, **POSSESSIONS, **ADPOSITIONS}


@dataclass
class FixtureSizes:
    """Number of sentences per generated file."""

    train: int = 200
    test: int = 100
    corpus: int = 200
    parallel: int = 300
    monolingual: int = 400


def _pick(rng: np.random.Generator, words: dict[str, str]) -> str:
    keys = sorted(words)
    return keys[int(rng.integers(len(keys)))]


def _translate_form(form: str, language: str) -> str:
    return form if language == SOURCE_LANG else DICTIONARY[form]


def pp_sentence(
    rng: np.random.Generator, language: str = SOURCE_LANG, pp_rate: float = 0.8
) -> Sentence:
    """One gold sentence of the toy grammar."""
    subject, verb, obj = _pick(rng, AGENTS), _pick(rng, VERBS), _pick(rng, AGENTS)
    forms = [subject, verb, obj]
    upos = ["NOUN", "VERB", "NOUN"]
    heads = [2, 0, 2]
    labels = ["nsubj", "root", "obj"]
    if rng.random() < pp_rate:
        instrument = rng.random() < 0.5
        noun = _pick(rng, INSTRUMENTS if instrument else POSSESSIONS)
        forms += ["with", noun]
        upos += ["ADP", "NOUN"]
        heads += [5, 2 if instrument else 3]
        labels += ["case", "obl" if instrument else "nmod"]
    forms = [_translate_form(form, language) for form in forms]
    return Sentence.from_forms(forms, upos, heads, labels, language)


def translate(sentence: Sentence, language: str = TARGET_LANG) -> Sentence:
    """Word-for-word translation of a source sentence; the tree is unchanged."""
    forms = [_translate_form(form, language) for form in sentence.forms]
    upos = [token.upos for token in sentence]
    return Sentence.from_forms(forms, upos, sentence.heads, sentence.labels, language)


def generate_treebank(count: int, language: str = SOURCE_LANG, seed: int = 0) -> Treebank:
    rng = make_rng(seed)
    return Treebank([pp_sentence(rng, language) for _ in range(count)], language)


def unparsed(sentences: Treebank | list[Sentence]) -> list[Sentence]:
    """Copies without heads and labels (POS tags kept)."""
    return [s.with_arcs([None] * len(s), [None] * len(s)) for s in sentences]


def generate_parallel(count: int, seed: int = 0) -> tuple[Treebank, Treebank]:
    """Aligned sentence pairs: gold source trees and their gold target translations."""
    source = generate_treebank(count, SOURCE_LANG, seed)
    target = Treebank([translate(s) for s in source], TARGET_LANG)
    return source, target


_PHRASE_WORDS = {
    "DET": ["the", "a"],
    "ADJ": ["big", "red", "old"],
    "NOUN": ["dog", "cat", "box", "tree"],
    "VERB": ["sees", "takes"],
    "ADP": ["in", "near"],
}
_PHRASE_LABELS = {"ADP": "case", "DET": "det", "ADJ": "amod"}


def deterministic_treebank(count: int, seed: int = 0) -> Treebank:
    """Sentences whose attachments follow from the POS sequence alone.

    ``DET (ADJ) NOUN VERB DET (ADJ) NOUN (ADP DET NOUN)``; every prepositional
    phrase attaches to the verb.
    """
    rng = make_rng(seed)
    sentences = []
    for _ in range(count):
        subject = ["DET"] + (["ADJ"] if rng.random() < 0.5 else []) + ["NOUN"]
        obj = ["DET"] + (["ADJ"] if rng.random() < 0.5 else []) + ["NOUN"]
        oblique = ["ADP", "DET", "NOUN"] if rng.random() < 0.5 else []
        verb = len(subject) + 1
        tags, heads, labels = [], [], []
        phrases = ((subject, "nsubj"), (["VERB"], "root"), (obj, "obj"), (oblique, "obl"))
        for phrase, relation in phrases:
            noun = len(tags) + len(phrase)
            for tag in phrase:
                tags.append(tag)
                if tag == "VERB":
                    heads.append(0)
                    labels.append(relation)
                elif tag == "NOUN":
                    heads.append(verb)
                    labels.append(relation)
                else:
                    heads.append(noun)
                    labels.append(_PHRASE_LABELS[tag])
        forms = [_PHRASE_WORDS[tag][int(rng.integers(len(_PHRASE_WORDS[tag])))] for tag in tags]
        sentences.append(Sentence.from_forms(forms, tags, heads, labels, SOURCE_LANG))
    return Treebank(sentences, SOURCE_LANG)


def two_class_corpus(
    count: int, seed: int = 0, length: int = 8
) -> tuple[MonolingualCorpus, set[str], set[str]]:
    """Sentences alternating between two disjoint word classes.

    Returns:
        The corpus and the two classes.
    """
    rng = make_rng(seed)
    first = {f"a{i}" for i in range(5)}
    second = {f"b{i}" for i in range(5)}
    ordered = [sorted(first), sorted(second)]
    sentences = []
    for _ in range(count):
        offset = int(rng.integers(2))
        sentences.append(
            [ordered[(offset + i) % 2][int(rng.integers(5))] for i in range(length)]
        )
    return MonolingualCorpus(sentences, "und"), first, second


CONFIG_TEMPLATE = """\
# Synthetic transfer experiment: {source} -> {target}.
mode = {mode}
target = {target}
sources = {source}
treebank.{source} = {source}-train.conllu
test = {target}-test.conllu
target_corpus = {target}-corpus.conllu
monolingual.{source} = {source}.txt
monolingual.{target} = {target}.txt
parallel.{source}.source = {source}-{target}.{source}.conllu
parallel.{source}.target = {source}-{target}.{target}.conllu
wals = wals.csv
num_clusters = 8
tiers = 100, 80
epochs = 3
beam_width = 8
seed = 1
"""


def write_fixtures(
    directory: str | Path, seed: int = 0, sizes: FixtureSizes | None = None
) -> list[Path]:
    """Write the toy treebanks, corpora, parallel data and configuration files.

    Returns:
        The written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sizes = sizes or FixtureSizes()
    written = []

    def conllu(name: str, sentences) -> None:
        path = directory / name
        with open(path, "w", encoding="utf-8") as file:
            write_conllu(sentences, file)
        written.append(path)

    def text(name: str, sentences) -> None:
        path = directory / name
        with open(path, "w", encoding="utf-8") as file:
            write_tokenized_corpus(sentences, file)
        written.append(path)

    conllu(f"{SOURCE_LANG}-train.conllu", generate_treebank(sizes.train, SOURCE_LANG, seed))
    conllu(f"{TARGET_LANG}-test.conllu", generate_treebank(sizes.test, TARGET_LANG, seed + 1))
    conllu(
        f"{TARGET_LANG}-corpus.conllu",
        unparsed(generate_treebank(sizes.corpus, TARGET_LANG, seed + 2)),
    )
    source, target = generate_parallel(sizes.parallel, seed + 3)
    conllu(f"{SOURCE_LANG}-{TARGET_LANG}.{SOURCE_LANG}.conllu", unparsed(source))
    conllu(f"{SOURCE_LANG}-{TARGET_LANG}.{TARGET_LANG}.conllu", unparsed(target))
    for offset, language in enumerate((SOURCE_LANG, TARGET_LANG), start=4):
        mono = generate_treebank(sizes.monolingual, language, seed + offset)
        text(f"{language}.txt", [s.forms for s in mono])

    path = directory / "wals.csv"
    path.write_text(
        "lang,82A,83A,85A,86A,87A,88A\n"
        f"{SOURCE_LANG},SV,VO,Prepositions,Noun-Genitive,Noun-Adjective,Demonstrative-Noun\n"
        f"{TARGET_LANG},SV,VO,Prepositions,Noun-Genitive,Noun-Adjective,Demonstrative-Noun\n",
        encoding="utf-8",
    )
    written.append(path)
    for mode in ("delex-baseline", "density"):
        path = directory / f"{mode}.cfg"
        path.write_text(
            CONFIG_TEMPLATE.format(mode=mode, source=SOURCE_LANG, target=TARGET_LANG),
            encoding="utf-8",
        )
        written.append(path)
    logger.info("wrote %i fixture files to %s", len(written), directory)
    return written
