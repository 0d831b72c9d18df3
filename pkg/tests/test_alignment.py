"""Tests for alignment module."""

import io
from collections import Counter

import pytest

from crossparse.alignment import (
    NULL,
    AlignedPair,
    TranslationLexicon,
    TranslationTable,
    compose_lexicons,
    extract_lexicon,
    intersect,
    log_likelihood,
    read_lexicon,
    read_parallel,
    read_pharaoh,
    reverse_pairs,
    symmetrize,
    train_ibm1,
    viterbi_align,
    write_lexicon,
    write_pharaoh,
)
from crossparse.exception import AlignmentError, UsageError
from crossparse.synthetic import DICTIONARY, generate_parallel

TOY = [(["a", "b"], ["x", "y"]), (["a"], ["x"])]


@pytest.fixture(scope="module")
def synthetic_pairs():
    """500 word-for-word translated sentence pairs."""
    source, target = generate_parallel(500, seed=11)
    return [(s.forms, t.forms) for s, t in zip(source, target, strict=True)]


class TestTrainIbm1:
    """Tests for train_ibm1 function."""

    def test_toy_corpus(self):
        """Test that EM resolves the toy corpus."""
        table = train_ibm1(TOY, iterations=20)
        assert table.prob("x", "a") >= 0.9
        assert table.direction == "forward"

    def test_likelihood_does_not_decrease(self):
        """Test that more EM iterations never lower the likelihood."""
        one = log_likelihood(train_ibm1(TOY, iterations=1), TOY)
        five = log_likelihood(train_ibm1(TOY, iterations=5), TOY)
        assert five >= one

    def test_reverse_direction(self):
        """Test that the reverse table is conditioned on target words."""
        table = train_ibm1(TOY, iterations=20, direction="reverse")
        assert table.direction == "reverse"
        assert table.prob("a", "x") >= 0.9

    def test_threads_match_serial(self, synthetic_pairs):
        """Test that the chunked expectation step gives the serial table."""
        pairs = synthetic_pairs[:100]
        serial = train_ibm1(pairs, iterations=2)
        pooled = train_ibm1(pairs, iterations=2, threads=3)
        for source, row in serial.probs.items():
            for target, p in row.items():
                assert pooled.prob(target, source) == pytest.approx(p)

    @pytest.mark.parametrize(
        "kwargs,error",
        [
            ({"iterations": 0}, UsageError),
            ({"direction": "sideways"}, UsageError),
        ],
    )
    def test_invalid_arguments(self, kwargs, error):
        """Test argument validation."""
        with pytest.raises(error):
            train_ibm1(TOY, **kwargs)

    def test_empty_corpus(self):
        """Test that an empty corpus cannot be aligned."""
        with pytest.raises(AlignmentError, match="empty"):
            train_ibm1([])


class TestViterbi:
    """Tests for viterbi_align, intersect and symmetrize."""

    def test_toy_links(self):
        """Test the intersected links of the toy corpus."""
        forward = train_ibm1(TOY, iterations=20)
        reverse = train_ibm1(TOY, iterations=20, direction="reverse")
        links = intersect(viterbi_align(forward, TOY[0]), viterbi_align(reverse, TOY[0]))
        assert links == {(0, 0), (1, 1)}
        assert symmetrize(TOY, iterations=20)[0].links == {(0, 0), (1, 1)}

    def test_null_needs_strictly_higher_probability(self):
        """Test that NULL only wins outright."""
        tied = TranslationTable({"a": {"x": 0.5}, NULL: {"x": 0.5}})
        assert viterbi_align(tied, (["a"], ["x"])) == {(0, 0)}
        null_wins = TranslationTable({"a": {"x": 0.4}, NULL: {"x": 0.6}})
        assert viterbi_align(null_wins, (["a"], ["x"])) == frozenset()

    def test_ties_go_to_lowest_index(self):
        """Test that equally likely source words resolve to the first one."""
        table = TranslationTable({"a": {"x": 0.5}, "b": {"x": 0.5}})
        assert viterbi_align(table, (["a", "b"], ["x"])) == {(0, 0)}

    def test_reverse_orientation(self):
        """Test that reverse links come back as (source, target) pairs."""
        table = TranslationTable({"x": {"a": 0.1, "b": 0.9}}, direction="reverse")
        assert viterbi_align(table, (["a", "b"], ["x"])) == {(0, 0), (1, 0)}

    def test_aligned_pair_bounds(self):
        """Test that links must index into the sentences."""
        with pytest.raises(AlignmentError, match="out of bounds"):
            AlignedPair(["a"], ["x"], {(1, 0)})


class TestLexicon:
    """Tests for lexicon extraction and composition."""

    def test_synthetic_lexicon_precision(self, synthetic_pairs):
        """Test that frequent words translate to their dictionary entry."""
        lexicon = extract_lexicon(symmetrize(synthetic_pairs), "xs", "xt")
        frequent = {word: best for word, best in lexicon.entries.items() if best[1] >= 3}
        correct = sum(target == DICTIONARY[word] for word, (target, _) in frequent.items())
        assert len(frequent) >= 15
        assert correct / len(frequent) >= 0.95

    def test_counts_match_recount(self, synthetic_pairs):
        """Test lexicon counts against a direct recount of the links."""
        aligned = symmetrize(synthetic_pairs[:200])
        expected = {}
        for pair in aligned:
            for i, j in pair.links:
                expected.setdefault(pair.source[i], Counter())[pair.target[j]] += 1
        assert extract_lexicon(aligned, "xs", "xt").counts == expected

    def test_ties_go_to_smallest_word(self):
        """Test deterministic choice between equally frequent translations."""
        lexicon = TranslationLexicon("xs", "xt", {"a": Counter({"y": 2, "x": 2, "z": 1})})
        assert lexicon.best("a") == ("x", 2)
        assert lexicon.lookup("b") is None
        assert "a" in lexicon

    def test_long_pairs_skipped(self):
        """Test the sentence length filter."""
        long_pair = AlignedPair(["a"] * 5, ["x"] * 2, {(0, 0)})
        short_pair = AlignedPair(["b"], ["y"], {(0, 0)})
        lexicon = extract_lexicon([long_pair, short_pair], "xs", "xt", max_len=4)
        assert lexicon.entries == {"b": ("y", 1)}

    def test_reverse_pairs(self):
        """Test that reversing swaps sides and link orientation."""
        (pair,) = reverse_pairs([AlignedPair(["a", "b"], ["x"], {(1, 0)})])
        assert pair.source == ("x",)
        assert pair.target == ("a", "b")
        assert pair.links == {(0, 1)}

    def test_compose(self):
        """Test translation through a pivot language."""
        first = TranslationLexicon("xs", "xt", {"a": Counter({"x": 3}), "b": Counter({"q": 1})})
        second = TranslationLexicon("xt", "xu", {"x": Counter({"m": 1})})
        composed = compose_lexicons(first, second)
        assert (composed.src_lang, composed.tgt_lang) == ("xs", "xu")
        assert composed.entries == {"a": ("m", 3)}

    def test_compose_mismatch(self):
        """Test that the pivot languages must agree."""
        with pytest.raises(AlignmentError, match="cannot pivot"):
            compose_lexicons(TranslationLexicon("xs", "xt"), TranslationLexicon("xu", "xv"))


class TestFiles:
    """Tests for lexicon, parallel and alignment files."""

    def test_lexicon_round_trip(self):
        """Test the lexicon TSV layout."""
        lexicon = TranslationLexicon("xs", "xt", {"a": Counter({"x": 2, "y": 1})})
        stream = io.StringIO()
        write_lexicon(lexicon, stream)

        assert stream.getvalue() == "# src=xs tgt=xt\na\tx\t2\na\ty\t1\n"
        loaded = read_lexicon(stream.getvalue())
        assert loaded.counts == lexicon.counts
        assert (loaded.src_lang, loaded.tgt_lang) == ("xs", "xt")

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("a\tx\t2\n", "header"),
            ("# src=xs tgt=xt\na\tx\n", "line 2"),
            ("# src=xs tgt=xt\na\tx\ttwo\n", "malformed"),
        ],
    )
    def test_lexicon_errors(self, text, fragment):
        """Test malformed lexicon files."""
        with pytest.raises(AlignmentError, match=fragment):
            read_lexicon(text)

    def test_read_parallel(self):
        """Test line-by-line pairing."""
        assert read_parallel("a b\nc\n", "x y\nz\n") == [(["a", "b"], ["x", "y"]), (["c"], ["z"])]
        with pytest.raises(AlignmentError, match="differ in length"):
            read_parallel("a\nb\n", "x\n")

    def test_pharaoh(self):
        """Test reading and writing i-j links."""
        stream = io.StringIO()
        write_pharaoh([{(1, 0), (0, 1)}, set()], stream)
        assert stream.getvalue() == "0-1 1-0\n\n"
        assert read_pharaoh(stream.getvalue()) == [{(0, 1), (1, 0)}, frozenset()]

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("0-1 2x\n", "malformed link"),
            ("0-5\n", "out of bounds"),
            ("0-0\n0-0\n", "2 alignment lines for 1"),
        ],
    )
    def test_pharaoh_errors(self, text, fragment):
        """Test malformed links and bounds checks against the sentence pairs."""
        with pytest.raises(AlignmentError, match=fragment):
            read_pharaoh(text, pairs=[(["a", "b"], ["x", "y"])])
