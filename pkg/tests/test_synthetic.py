"""Tests for synthetic module."""

from crossparse.synthetic import (
    DICTIONARY,
    FixtureSizes,
    deterministic_treebank,
    generate_parallel,
    generate_treebank,
    two_class_corpus,
    unparsed,
    write_fixtures,
)
from crossparse.treebank import is_projective, validate_tree


class TestGenerators:
    """Tests for the sentence generators."""

    def test_treebank_trees_are_valid(self):
        """Test that every generated sentence is a projective single-rooted tree."""
        for sentence in generate_treebank(200, seed=4):
            validate_tree(sentence)
            assert is_projective(sentence)
            assert len(sentence) in (3, 5)

    def test_attachment_follows_the_noun(self):
        """Test that instruments attach to the verb and possessions to the object."""
        for sentence in generate_treebank(100, seed=2):
            if len(sentence) == 5:
                label = sentence[5].deprel
                assert sentence[5].head == (2 if label == "obl" else 3)

    def test_parallel_is_word_for_word(self):
        """Test that targets are dictionary translations with the same tree."""
        source, target = generate_parallel(50, seed=3)
        for s, t in zip(source, target, strict=True):
            assert t.forms == [DICTIONARY[form] for form in s.forms]
            assert t.heads == s.heads
            assert t.language == "xt"

    def test_seeded(self):
        """Test that the same seed gives the same treebank."""
        first = [s.forms for s in generate_treebank(20, seed=9)]
        assert first == [s.forms for s in generate_treebank(20, seed=9)]
        assert first != [s.forms for s in generate_treebank(20, seed=10)]

    def test_unparsed(self):
        """Test that arcs are removed and tags kept."""
        (sentence,) = unparsed(generate_treebank(1, seed=0))
        assert set(sentence.heads) == {None}
        assert [token.upos for token in sentence][:3] == ["NOUN", "VERB", "NOUN"]

    def test_deterministic_treebank(self):
        """Test that every noun hangs off the verb."""
        for sentence in deterministic_treebank(50, seed=1):
            validate_tree(sentence)
            verb = next(token.index for token in sentence if token.upos == "VERB")
            assert all(token.head == verb for token in sentence if token.upos == "NOUN")

    def test_two_class_corpus(self):
        """Test that neighbouring words always come from different classes."""
        corpus, first, second = two_class_corpus(30, seed=0, length=6)
        assert not first & second
        for tokens in corpus:
            assert len(tokens) == 6
            for left, right in zip(tokens, tokens[1:], strict=False):
                assert (left in first) != (right in first)


def test_write_fixtures(tmp_path):
    """Test the file set written for the bundled experiment."""
    written = write_fixtures(tmp_path, sizes=FixtureSizes(train=5, test=4, corpus=3))
    names = {path.name for path in written}

    assert names == {
        "xs-train.conllu",
        "xt-test.conllu",
        "xt-corpus.conllu",
        "xs-xt.xs.conllu",
        "xs-xt.xt.conllu",
        "xs.txt",
        "xt.txt",
        "wals.csv",
        "delex-baseline.cfg",
        "density.cfg",
    }
    assert (tmp_path / "xs-train.conllu").read_text(encoding="utf-8").count("\n\n") == 5
    assert "mode = density" in (tmp_path / "density.cfg").read_text(encoding="utf-8")
