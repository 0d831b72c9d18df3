"""Pytest configuration and shared fixtures."""

import random

import pytest

from crossparse.perceptron import Model, train
from crossparse.synthetic import deterministic_treebank, generate_treebank
from crossparse.treebank import Sentence

GOLD_CONLLU = """\
# sent_id = 1
1\tThe\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tdog\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tbarks\t_\tVERB\t_\t_\t0\troot\t_\t_
4\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_

"""

# One wrong head (token 4) and one wrong label (token 2): UAS 75.0, LAS 50.0.
PRED_CONLLU = """\
# sent_id = 1
1\tThe\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tdog\t_\tNOUN\t_\t_\t3\tobj\t_\t_
3\tbarks\t_\tVERB\t_\t_\t0\troot\t_\t_
4\t.\t_\tPUNCT\t_\t_\t2\tpunct\t_\t_

"""


def random_projective_heads(rng: random.Random, n: int) -> list[int]:
    """Heads of a random single-rooted projective tree over tokens 1..n."""
    heads = [0] * (n + 1)

    def attach(low: int, high: int, head: int) -> None:
        if low > high:
            return
        root = rng.randint(low, high)
        heads[root] = head
        attach(low, root - 1, root)
        attach(root + 1, high, root)

    attach(1, n, 0)
    return heads[1:]


def random_sentence(rng: random.Random, n: int) -> Sentence:
    tags = ["NOUN", "VERB", "ADJ", "ADP", "DET"]
    labels = ["nsubj", "obj", "amod", "case", "det"]
    heads = random_projective_heads(rng, n)
    return Sentence.from_forms(
        [f"w{i}" for i in range(n)],
        [rng.choice(tags) for _ in range(n)],
        heads,
        ["root" if h == 0 else rng.choice(labels) for h in heads],
    )


@pytest.fixture
def gold_conllu():
    """The 4-token gold sentence."""
    return GOLD_CONLLU


@pytest.fixture
def pred_conllu():
    """A parse of the 4-token sentence with one head and one label error."""
    return PRED_CONLLU


@pytest.fixture
def gold_sentence():
    """``The dog barks .`` with its gold tree."""
    return Sentence.from_forms(
        ["The", "dog", "barks", "."],
        ["DET", "NOUN", "VERB", "PUNCT"],
        [2, 3, 0, 3],
        ["det", "nsubj", "root", "punct"],
    )


@pytest.fixture
def toy_treebank():
    """Forty sentences of the toy source language."""
    return generate_treebank(40, seed=0)


@pytest.fixture(scope="session")
def deterministic_sentences():
    """A treebank whose attachments follow from the POS sequence."""
    return deterministic_treebank(100, seed=0)


@pytest.fixture(scope="session")
def trained_model(deterministic_sentences):
    """A delexicalized model fit to the deterministic treebank."""
    return train(Model(), deterministic_sentences, epochs=3, seed=0)
