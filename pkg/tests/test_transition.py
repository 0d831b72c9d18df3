"""Tests for transition module."""

import random

import pytest

from crossparse.exception import TransitionError
from crossparse.transition import (
    REDUCE,
    SHIFT,
    Action,
    ActionCodec,
    ActionKind,
    ArcConstraints,
    apply,
    config_to_tree,
    expand_actions,
    initial_config,
    legal_actions,
    oracle_sequence,
    replay,
    static_oracle,
)
from crossparse.treebank import PartialTree, Sentence
from tests.conftest import random_projective_heads, random_sentence


def left(label):
    return Action(ActionKind.LEFT_ARC, label)


def right(label):
    return Action(ActionKind.RIGHT_ARC, label)


class TestActionCodec:
    """Tests for ActionCodec class."""

    def test_codes_follow_tie_break_order(self):
        """Test SHIFT=0, REDUCE=1, LEFT_ARC labels, then RIGHT_ARC labels."""
        codec = ActionCodec(["det", "nsubj"])

        assert len(codec) == 6
        assert codec.encode(SHIFT) == 0
        assert codec.encode(REDUCE) == 1
        assert codec.encode(left("det")) == 2
        assert codec.encode(left("nsubj")) == 3
        assert codec.encode(right("det")) == 4
        assert codec.encode(right("nsubj")) == 5
        assert [codec.decode(code) for code in range(6)] == [
            SHIFT, REDUCE, left("det"), left("nsubj"), right("det"), right("nsubj")
        ]

    def test_unknown_label(self):
        """Test that encoding a label outside the alphabet fails."""
        with pytest.raises(TransitionError, match="not in alphabet"):
            ActionCodec(["det"]).encode(left("obj"))

    def test_arc_needs_label(self):
        """Test that arc actions require a label and others refuse one."""
        with pytest.raises(TransitionError):
            Action(ActionKind.LEFT_ARC)
        with pytest.raises(TransitionError):
            Action(ActionKind.SHIFT, "det")


class TestTransitions:
    """Tests for configurations and action legality."""

    def test_initial_config(self, gold_sentence):
        """Test stack [ROOT], full buffer, no arcs."""
        config = initial_config(gold_sentence)
        assert config.stack == (0,)
        assert config.buffer == (1, 2, 3, 4)
        assert config.arcs == frozenset()
        assert legal_actions(config) == {ActionKind.SHIFT, ActionKind.RIGHT_ARC}

    def test_empty_sentence(self):
        """Test that an empty sentence cannot be parsed."""
        with pytest.raises(TransitionError, match="empty sentence"):
            initial_config(Sentence([]))

    def test_apply_does_not_mutate(self, gold_sentence):
        """Test that apply returns a new configuration."""
        config = initial_config(gold_sentence)
        shifted = apply(config, SHIFT)
        assert config.stack == (0,)
        assert shifted.stack == (0, 1)
        assert shifted.front == 2

    def test_reduce_needs_head(self, gold_sentence):
        """Test that REDUCE is illegal for a headless stack top."""
        config = apply(initial_config(gold_sentence), SHIFT)
        assert ActionKind.REDUCE not in legal_actions(config)
        with pytest.raises(TransitionError, match="not legal"):
            apply(config, REDUCE)

    def test_no_left_arc_from_root(self, gold_sentence):
        """Test that ROOT never becomes a dependent."""
        assert ActionKind.LEFT_ARC not in legal_actions(initial_config(gold_sentence))

    def test_terminal_has_no_actions(self):
        """Test that a terminal configuration refuses actions."""
        sentence = Sentence.from_forms(["a"], ["NOUN"], [0], ["root"])
        config = apply(initial_config(sentence), right("root"))
        assert config.is_terminal
        with pytest.raises(TransitionError, match="terminal"):
            legal_actions(config)

    def test_headless_tokens_attach_to_root(self):
        """Test the fallback label for tokens left without a head."""
        sentence = Sentence.from_forms(["a", "b"], ["NOUN", "VERB"])
        config = apply(apply(initial_config(sentence), SHIFT), SHIFT)
        tree = config_to_tree(config)
        assert tree.heads == [0, 0]
        assert tree.labels == ["dep", "dep"]


class TestOracle:
    """Tests for the static oracle."""

    def test_gold_sequence(self, gold_sentence):
        """Test the canonical action sequence of a small tree."""
        assert oracle_sequence(gold_sentence) == [
            SHIFT,
            left("det"),
            SHIFT,
            left("nsubj"),
            right("root"),
            right("punct"),
        ]

    def test_round_trip_random_trees(self):
        """Test that the oracle rebuilds 1,000 random projective trees exactly."""
        rng = random.Random(7)
        for _ in range(1000):
            sentence = random_sentence(rng, rng.randint(1, 15))
            configs = replay(sentence, oracle_sequence(sentence))
            tree = config_to_tree(configs[-1])
            assert tree.heads == sentence.heads
            assert tree.labels == sentence.labels

    def test_non_projective(self):
        """Test that the oracle is undefined for crossing arcs."""
        sentence = Sentence.from_forms(["w"] * 4, ["NOUN"] * 4, [3, 4, 0, 3], ["x"] * 4)
        with pytest.raises(TransitionError, match="oracle undefined"):
            oracle_sequence(sentence)
        with pytest.raises(TransitionError, match="oracle undefined"):
            static_oracle(initial_config(sentence), sentence)

    def test_replay_starts_at_initial(self, gold_sentence):
        """Test that replay returns one configuration more than actions."""
        actions = oracle_sequence(gold_sentence)
        configs = replay(gold_sentence, actions)
        assert len(configs) == len(actions) + 1
        assert configs[0].stack == (0,)
        assert configs[-1].is_terminal


class TestConstraints:
    """Tests for constrained legality."""

    def test_contradiction(self):
        """Test head and label contradictions."""
        sentence = Sentence.from_forms(["a", "b"], ["X"] * 2, [2, None], ["det", None])
        constraints = ArcConstraints.from_sentence(sentence)
        assert len(constraints) == 1
        assert constraints.contradicts(0, 1)
        assert constraints.contradicts(2, 1, "amod")
        assert not constraints.contradicts(2, 1, "det")
        assert not constraints.contradicts(1, 2)

    def test_required_label_only(self):
        """Test that a constrained modifier is offered its required label only."""
        sentence = Sentence.from_forms(["a", "b"], ["X"] * 2, [2, None], ["det", None])
        constraints = ArcConstraints.from_sentence(sentence)
        config = apply(initial_config(sentence), SHIFT)
        actions = expand_actions(config, ActionCodec(["amod", "det"]), constraints)
        assert left("det") in actions
        assert left("amod") not in actions
        assert all(action.kind is not ActionKind.RIGHT_ARC for action in actions)

    def test_required_label_outside_alphabet(self):
        """Test that an unknown required label is refused rather than widened."""
        sentence = Sentence.from_forms(["a", "b"], ["X"] * 2, [2, None], ["det", None])
        config = apply(initial_config(sentence), SHIFT)
        constraints = ArcConstraints.from_sentence(sentence)
        with pytest.raises(TransitionError, match="'det' of token 1 not in alphabet"):
            expand_actions(config, ActionCodec(["amod"]), constraints)

    def test_labels_restrict_to_alphabet(self):
        """Test that unknown required labels become head-only constraints."""
        sentence = Sentence.from_forms(["a", "b"], ["X"] * 2, [2, None], ["det", None])
        constraints = ArcConstraints.from_sentence(sentence, labels=["amod", "obj"])
        assert constraints.head_of(1) == 2
        assert constraints.label_of(1) is None
        config = apply(initial_config(sentence), SHIFT)
        actions = expand_actions(config, ActionCodec(["amod", "obj"]), constraints)
        assert actions == [left("amod"), left("obj")]

    def test_replay_under_constraints(self, gold_sentence):
        """Test that replay checks actions against the constraints."""
        constraints = ArcConstraints.from_sentence(gold_sentence)
        configs = replay(gold_sentence, oracle_sequence(gold_sentence), constraints)
        assert configs[-1].is_terminal
        with pytest.raises(TransitionError, match="violates the arc constraints"):
            replay(gold_sentence, [right("det")], constraints)

    def test_completion_keeps_constraint_arcs(self):
        """Test that any legal path under constraints builds every constrained arc."""
        rng = random.Random(3)
        codec = ActionCodec(["a", "b"])
        for _ in range(200):
            n = rng.randint(2, 10)
            heads = random_projective_heads(rng, n)
            kept = [h if rng.random() < 0.6 else None for h in heads]
            sentence = Sentence.from_forms(
                ["w"] * n, ["X"] * n, kept, ["a" if h is not None else None for h in kept]
            )
            tree = PartialTree.from_sentence(sentence)
            constraints = ArcConstraints.from_partial_tree(tree)
            config = initial_config(sentence)
            while not config.is_terminal:
                config = apply(config, rng.choice(expand_actions(config, codec, constraints)))
            completed = config_to_tree(config)
            for token in sentence:
                if token.head is not None:
                    assert completed[token.index].head == token.head
                    assert completed[token.index].deprel == "a"

    def test_completion_with_unknown_labels(self):
        """Test completion when some required labels are missing from the alphabet."""
        rng = random.Random(4)
        codec = ActionCodec(["a", "b"])
        for _ in range(200):
            n = rng.randint(2, 10)
            heads = random_projective_heads(rng, n)
            kept = [h if rng.random() < 0.6 else None for h in heads]
            labels = [rng.choice(["a", "c"]) if h is not None else None for h in kept]
            sentence = Sentence.from_forms(["w"] * n, ["X"] * n, kept, labels)
            constraints = ArcConstraints.from_sentence(sentence, labels=codec.labels)
            config = initial_config(sentence)
            while not config.is_terminal:
                config = apply(config, rng.choice(expand_actions(config, codec, constraints)))
            completed = config_to_tree(config)
            for token in sentence:
                if token.head is not None:
                    assert completed[token.index].head == token.head
                    if token.deprel == "a":
                        assert completed[token.index].deprel == "a"
                    else:
                        assert completed[token.index].deprel in codec.labels
