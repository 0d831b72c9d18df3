"""The arc-eager transition system.

Configurations are immutable: `apply` returns a new configuration. The buffer of an
arc-eager configuration is always a suffix of the sentence, so it is stored as the
index of its front token.

Classes:
    ActionKind / Action: The transition alphabet.
    ActionCodec: Maps labeled actions to dense integer codes in tie-break order.
    Configuration: Stack, buffer and arcs over one sentence.
    ArcConstraints: Required heads (and labels) taken from a projected partial tree.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import IntEnum

from crossparse.exception import TransitionError
from crossparse.treebank import ROOT, PartialTree, Sentence, is_projective


class ActionKind(IntEnum):
    """Transition kinds, in tie-break order."""

    SHIFT = 0
    REDUCE = 1
    LEFT_ARC = 2
    RIGHT_ARC = 3


ARC_KINDS = (ActionKind.LEFT_ARC, ActionKind.RIGHT_ARC)


@dataclass(frozen=True)
class Action:
    """A transition; arc-creating kinds carry a dependency label."""

    kind: ActionKind
    label: str | None = None

    def __post_init__(self):
        if (self.kind in ARC_KINDS) != (self.label is not None):
            raise TransitionError(f"{self.kind.name} with label {self.label!r}")

    def __str__(self) -> str:
        return self.kind.name if self.label is None else f"{self.kind.name}({self.label})"


SHIFT = Action(ActionKind.SHIFT)
REDUCE = Action(ActionKind.REDUCE)


class ActionCodec:
    """Dense integer codes for labeled actions.

    Codes follow the decoder's tie-break order: SHIFT < REDUCE < LEFT_ARC(labels in
    alphabet order) < RIGHT_ARC(labels in alphabet order).
    """

    def __init__(self, labels: Sequence[str]):
        self.labels = list(labels)
        self._label_index = {label: i for i, label in enumerate(self.labels)}
        if len(self._label_index) != len(self.labels):
            raise TransitionError("duplicate labels in alphabet")

    def __len__(self) -> int:
        return 2 + 2 * len(self.labels)

    def has_label(self, label: str) -> bool:
        return label in self._label_index

    def encode(self, action: Action) -> int:
        if action.kind is ActionKind.SHIFT:
            return 0
        if action.kind is ActionKind.REDUCE:
            return 1
        try:
            offset = self._label_index[action.label]
        except KeyError:
            raise TransitionError(f"label {action.label!r} not in alphabet") from None
        if action.kind is ActionKind.LEFT_ARC:
            return 2 + offset
        return 2 + len(self.labels) + offset

    def decode(self, code: int) -> Action:
        if code == 0:
            return SHIFT
        if code == 1:
            return REDUCE
        code -= 2
        if code < len(self.labels):
            return Action(ActionKind.LEFT_ARC, self.labels[code])
        return Action(ActionKind.RIGHT_ARC, self.labels[code - len(self.labels)])


@dataclass(frozen=True, eq=False)
class Configuration:
    """An arc-eager parser state.

    Attributes:
        sentence: The sentence being parsed.
        stack: Token indices, bottom first; the bottom is ROOT (0).
        front: Index of the buffer's first token; ``len(sentence) + 1`` when empty.
        heads: Head per position (index 0 unused), None when unattached.
        labels: Label per position (index 0 unused).
    """

    sentence: Sentence
    stack: tuple[int, ...]
    front: int
    heads: tuple[int | None, ...]
    labels: tuple[str | None, ...]

    @property
    def n(self) -> int:
        return len(self.heads) - 1

    @property
    def buffer(self) -> tuple[int, ...]:
        return tuple(range(self.front, self.n + 1))

    @property
    def arcs(self) -> frozenset[tuple[int, int, str | None]]:
        """Arc set as (head, modifier, label) triples."""
        return frozenset(
            (head, modifier, self.labels[modifier])
            for modifier, head in enumerate(self.heads)
            if modifier and head is not None
        )

    @property
    def is_terminal(self) -> bool:
        return self.front > self.n

    @property
    def top(self) -> int:
        return self.stack[-1]

    def has_head(self, index: int) -> bool:
        return self.heads[index] is not None

    def __repr__(self) -> str:
        return (
            f"Configuration(stack={list(self.stack)}, buffer={list(self.buffer)}, "
            f"arcs={sorted(self.arcs)})"
        )


@dataclass(frozen=True)
class ArcConstraints:
    """Required heads per token, taken from a projected partial tree.

    Attributes:
        required: Per position (index 0 unused) either None or a (head, label) pair;
            the label may be None when only the head is constrained.
    """

    required: tuple[tuple[int, str | None] | None, ...]

    @classmethod
    def from_sentence(
        cls,
        sentence: Sentence,
        with_labels: bool = True,
        labels: Iterable[str] | None = None,
    ) -> "ArcConstraints":
        """Constraints from the attached tokens of ``sentence``.

        When ``labels`` is given, a required label outside it is dropped and only
        the head stays required.
        """
        known = None if labels is None else set(labels)
        n = len(sentence)
        required: list[tuple[int, str | None] | None] = [None]
        for token in sentence:
            if token.head is None:
                required.append(None)
                continue
            if not 0 <= token.head <= n or token.head == token.index:
                raise TransitionError(
                    f"constraint head {token.head} invalid for token {token.index}"
                )
            label = token.deprel if with_labels else None
            if known is not None and label not in known:
                label = None
            required.append((token.head, label))
        return cls(tuple(required))

    @classmethod
    def from_partial_tree(
        cls, tree: PartialTree, with_labels: bool = True, labels: Iterable[str] | None = None
    ) -> "ArcConstraints":
        return cls.from_sentence(tree.sentence, with_labels, labels)

    def head_of(self, modifier: int) -> int | None:
        entry = self.required[modifier]
        return None if entry is None else entry[0]

    def label_of(self, modifier: int) -> str | None:
        entry = self.required[modifier]
        return None if entry is None else entry[1]

    def contradicts(self, head: int, modifier: int, label: str | None = None) -> bool:
        """True if the arc (head, modifier, label) disagrees with the constraint."""
        entry = self.required[modifier]
        if entry is None:
            return False
        if entry[0] != head:
            return True
        return label is not None and entry[1] is not None and entry[1] != label

    def __len__(self) -> int:
        return sum(1 for entry in self.required if entry is not None)


def initial_config(sentence: Sentence) -> Configuration:
    """Stack [ROOT], buffer [1..n], no arcs."""
    n = len(sentence)
    if n == 0:
        raise TransitionError("cannot parse an empty sentence")
    return Configuration(sentence, (ROOT,), 1, (None,) * (n + 1), (None,) * (n + 1))


def _base_legal(config: Configuration) -> set[ActionKind]:
    kinds = {ActionKind.SHIFT, ActionKind.RIGHT_ARC}
    top = config.top
    if config.has_head(top):
        kinds.add(ActionKind.REDUCE)
    elif top != ROOT:
        kinds.add(ActionKind.LEFT_ARC)
    return kinds


def _pending_dependent(config: Configuration, constraints: ArcConstraints, head: int) -> bool:
    """Some buffer token is required to attach to ``head``."""
    return any(constraints.head_of(m) == head for m in range(config.front, config.n + 1))


def _buried_dependent(config: Configuration, constraints: ArcConstraints, head: int) -> bool:
    """Some headless stack token is required to attach to ``head``."""
    return any(
        constraints.head_of(k) == head and not config.has_head(k) for k in config.stack if k != ROOT
    )


def legal_actions(
    config: Configuration, constraints: ArcConstraints | None = None
) -> set[ActionKind]:
    """Action kinds allowed in ``config``.

    Without constraints this is arc-eager legality. With constraints, arc-creating
    kinds whose arc contradicts a required head are removed; then kinds that would
    make a still-unbuilt required arc unreachable are removed too, unless that
    leaves nothing (non-projective constraint sets), in which case only the
    contradiction pruning applies. SHIFT is never removed by contradiction pruning,
    so the result is never empty.

    Raises:
        TransitionError: ``config`` is terminal.
    """
    if config.is_terminal:
        raise TransitionError("no actions from a terminal configuration")
    kinds = _base_legal(config)
    if constraints is None:
        return kinds
    top, front = config.top, config.front
    if ActionKind.LEFT_ARC in kinds and constraints.contradicts(front, top):
        kinds.discard(ActionKind.LEFT_ARC)
    if constraints.contradicts(top, front):
        kinds.discard(ActionKind.RIGHT_ARC)

    reachable = set(kinds)
    if ActionKind.LEFT_ARC in reachable and _pending_dependent(config, constraints, top):
        reachable.discard(ActionKind.LEFT_ARC)
    if ActionKind.REDUCE in reachable and _pending_dependent(config, constraints, top):
        reachable.discard(ActionKind.REDUCE)
    if ActionKind.RIGHT_ARC in reachable and _buried_dependent(config, constraints, front):
        reachable.discard(ActionKind.RIGHT_ARC)
    if ActionKind.SHIFT in reachable and (
        constraints.head_of(front) in config.stack or _buried_dependent(config, constraints, front)
    ):
        reachable.discard(ActionKind.SHIFT)
    return reachable or kinds


def expand_actions(
    config: Configuration, codec: ActionCodec, constraints: ArcConstraints | None = None
) -> list[Action]:
    """Labeled legal actions in tie-break order.

    A constrained modifier with a required label only gets that label.

    Raises:
        TransitionError: A required label is not in the codec's alphabet.
    """
    actions: list[Action] = []
    kinds = legal_actions(config, constraints)
    for kind in sorted(kinds):
        if kind is ActionKind.SHIFT:
            actions.append(SHIFT)
        elif kind is ActionKind.REDUCE:
            actions.append(REDUCE)
        else:
            modifier = config.top if kind is ActionKind.LEFT_ARC else config.front
            required = constraints.label_of(modifier) if constraints is not None else None
            if required is None:
                actions.extend(Action(kind, label) for label in codec.labels)
            elif codec.has_label(required):
                actions.append(Action(kind, required))
            else:
                raise TransitionError(
                    f"required label {required!r} of token {modifier} not in alphabet"
                )
    return actions


def _attach(config: Configuration, head: int, modifier: int, label: str):
    heads = list(config.heads)
    labels = list(config.labels)
    heads[modifier] = head
    labels[modifier] = label
    return tuple(heads), tuple(labels)


def apply(config: Configuration, action: Action) -> Configuration:
    """Apply ``action`` and return the successor configuration.

    Raises:
        TransitionError: The action is not legal in ``config``.
    """
    if config.is_terminal or action.kind not in _base_legal(config):
        raise TransitionError(f"{action} is not legal in {config!r}")
    top, front = config.top, config.front
    if action.kind is ActionKind.SHIFT:
        return Configuration(
            config.sentence, config.stack + (front,), front + 1, config.heads, config.labels
        )
    if action.kind is ActionKind.REDUCE:
        return Configuration(config.sentence, config.stack[:-1], front, config.heads, config.labels)
    if action.kind is ActionKind.LEFT_ARC:
        heads, labels = _attach(config, front, top, action.label)
        return Configuration(config.sentence, config.stack[:-1], front, heads, labels)
    heads, labels = _attach(config, top, front, action.label)
    return Configuration(config.sentence, config.stack + (front,), front + 1, heads, labels)


def _gold_head(gold: Sentence, index: int) -> int | None:
    return None if index == ROOT else gold[index].head


def _oracle_step(config: Configuration, gold: Sentence) -> Action:
    top, front = config.top, config.front
    if top != ROOT and _gold_head(gold, top) == front:
        return Action(ActionKind.LEFT_ARC, gold[top].deprel or "dep")
    if _gold_head(gold, front) == top:
        return Action(ActionKind.RIGHT_ARC, gold[front].deprel or "dep")
    if config.has_head(top):
        for below in config.stack[:-1]:
            if _gold_head(gold, front) == below or _gold_head(gold, below) == front:
                return REDUCE
    return SHIFT


def static_oracle(config: Configuration, gold: Sentence) -> Action:
    """The canonical next action towards the gold tree.

    Raises:
        TransitionError: The gold tree is non-projective ("oracle undefined").
    """
    if not is_projective(gold):
        raise TransitionError("oracle undefined for a non-projective tree")
    return _oracle_step(config, gold)


def oracle_sequence(gold: Sentence) -> list[Action]:
    """Action sequence that rebuilds the gold tree from the initial configuration.

    Raises:
        TransitionError: The gold tree is non-projective ("oracle undefined").
    """
    if not is_projective(gold):
        raise TransitionError("oracle undefined for a non-projective tree")
    config = initial_config(gold)
    actions = []
    while not config.is_terminal:
        action = _oracle_step(config, gold)
        actions.append(action)
        config = apply(config, action)
    return actions


def replay(
    sentence: Sentence, actions: Iterable[Action], constraints: ArcConstraints | None = None
) -> list[Configuration]:
    """Configurations visited by ``actions``, starting with the initial one.

    Raises:
        TransitionError: An action is illegal, or pruned by ``constraints``.
    """
    configs = [initial_config(sentence)]
    for action in actions:
        if constraints is not None and action.kind not in legal_actions(configs[-1], constraints):
            raise TransitionError(f"{action} violates the arc constraints in {configs[-1]!r}")
        configs.append(apply(configs[-1], action))
    return configs


def config_to_tree(config: Configuration, fallback_label: str = "dep") -> Sentence:
    """Read heads and labels off a terminal configuration.

    Tokens left without a head attach to ROOT with ``fallback_label``.
    """
    heads = []
    labels = []
    for index in range(1, config.n + 1):
        if config.heads[index] is None:
            heads.append(ROOT)
            labels.append(fallback_label)
        else:
            heads.append(config.heads[index])
            labels.append(config.labels[index])
    return config.sentence.with_arcs(heads, labels)
