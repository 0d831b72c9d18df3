"""Feature templates and linear scoring.

Three template families are scored by one linear model:

* ``P``: unlexicalized templates over POS tags, arc labels, valency and distance;
* ``C``: cluster templates: every ``P`` template that reads the POS of stack-0 or
  buffer-0 re-emitted with that POS replaced by the 4- or 6-bit cluster prefix (cross
  product over the replaced slots), and every ``L`` template whose words are at
  stack-0/buffer-0 re-emitted with the full cluster bit-string in place of the word.
  One block per clustering: the cross-lingual clustering is keyed on the surface
  form, the monolingual target clustering on the lexical form;
* ``L``: lexical templates over each token's lexical form (``Token.lexform``).
  Tokens without a lexical form contribute no ``L`` features.

A feature is identified by its template id and a 64-bit hash of the instantiated
values. The inventory is listed in ``docs/templates.md``.
"""

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

from crossparse.clustering import Clustering
from crossparse.helper import stable_hash64
from crossparse.transition import Configuration
from crossparse.treebank import ROOT

TEMPLATE_VERSION = 1

FAMILIES = ("P", "C", "L")
FAMILY_RANGES = {"P": range(0, 1000), "L": range(1000, 2000), "C": range(2000, 4000)}
CROSS_BLOCK = 2000
MONO_BLOCK = 3000
DISTANCE_CAP = 10
CLUSTER_LEVELS = (4, 6)

# Slot names: <position><attribute>. Attributes: p = POS, w = lexical form,
# wp = form/POS, L = arc label, c4/c6/cf = cluster prefix / full bit-string,
# cfp = full bit-string/POS. Cluster attributes end in x (cross-lingual) or
# m (monolingual). d = distance, vr/vl/vlb = valencies, *set = label sets.
POS_TEMPLATES: list[tuple[str, ...]] = [
    # single words
    ("s0p",), ("b0p",), ("b1p",), ("b2p",), ("b3p",), ("s1p",), ("s2p",),
    # pairs
    ("s0p", "b0p"), ("b0p", "b1p"),
    # triples
    ("b0p", "b1p", "b2p"), ("s0p", "b0p", "b1p"), ("s0hp", "s0p", "b0p"),
    ("s0p", "s0lp", "b0p"), ("s0p", "s0rp", "b0p"), ("s0p", "b0p", "b0lp"),
    ("b1p", "b2p", "b3p"), ("s1p", "s0p", "b0p"), ("s2p", "s1p", "s0p"),
    # distance
    ("d", "s0p"), ("d", "b0p"), ("d", "s0p", "b0p"),
    # valency
    ("vr", "s0p"), ("vl", "s0p"), ("vlb", "b0p"),
    # unigrams
    ("s0hp",), ("s0L",), ("s0lp",), ("s0lL",), ("s0rp",), ("s0rL",), ("b0lp",), ("b0lL",),
    # third order
    ("s0hhp",), ("s0hL",), ("s0llp",), ("s0llL",), ("s0rrp",), ("s0rrL",), ("b0llp",),
    ("b0llL",), ("s0p", "s0lp", "s0llp"), ("s0p", "s0rp", "s0rrp"),
    ("s0p", "s0hp", "s0hhp"), ("b0p", "b0lp", "b0llp"),
    # label sets
    ("s0rset", "s0p"), ("s0lset", "s0p"), ("b0lset", "b0p"),
]

LEXICAL_TEMPLATES: list[tuple[str, ...]] = [
    # single words
    ("s0wp",), ("s0w",), ("b0wp",), ("b0w",), ("b1wp",), ("b1w",), ("b2wp",), ("b2w",),
    # pairs
    ("s0wp", "b0wp"), ("s0wp", "b0w"), ("s0w", "b0wp"), ("s0wp", "b0p"), ("s0p", "b0wp"),
    ("s0w", "b0w"),
    # distance
    ("d", "s0w"), ("d", "b0w"), ("d", "s0w", "b0w"),
    # valency
    ("vr", "s0w"), ("vl", "s0w"), ("vlb", "b0w"),
    # unigrams
    ("s0hw",), ("s0lw",), ("s0rw",), ("b0lw",),
    # third order
    ("s0hhw",), ("s0llw",), ("s0rrw",), ("b0llw",),
    # label sets
    ("s0rset", "s0w"), ("s0lset", "s0w"), ("b0lset", "b0w"),
]

_POS_AT_ZERO = ("s0p", "b0p")
_WORD_AT_ZERO = {"s0w": "s0cf", "b0w": "b0cf", "s0wp": "s0cfp", "b0wp": "b0cfp"}


@dataclass(frozen=True)
class Template:
    template_id: int
    slots: tuple[str, ...]
    family: str

    @property
    def name(self) -> str:
        return ".".join(self.slots)


def _cluster_expansions(suffix: str) -> list[tuple[str, ...]]:
    expansions = []
    for slots in POS_TEMPLATES:
        positions = [i for i, slot in enumerate(slots) if slot in _POS_AT_ZERO]
        if not positions:
            continue
        choices = [(None, *CLUSTER_LEVELS)] * len(positions)
        for combo in itertools.product(*choices):
            if all(level is None for level in combo):
                continue
            expanded = list(slots)
            for position, level in zip(positions, combo, strict=True):
                if level is not None:
                    expanded[position] = f"{slots[position][:2]}c{level}{suffix}"
            expansions.append(tuple(expanded))
    for slots in LEXICAL_TEMPLATES:
        words = [slot for slot in slots if slot.endswith(("w", "wp")) and slot[0] in "sb"]
        if not words or any(slot not in _WORD_AT_ZERO for slot in words):
            continue
        expansions.append(
            tuple(_WORD_AT_ZERO[slot] + suffix if slot in _WORD_AT_ZERO else slot for slot in slots)
        )
    return expansions


def _build_templates() -> list[Template]:
    templates = [Template(i, slots, "P") for i, slots in enumerate(POS_TEMPLATES)]
    start = FAMILY_RANGES["L"].start
    templates += [Template(start + i, slots, "L") for i, slots in enumerate(LEXICAL_TEMPLATES)]
    for block, suffix in ((CROSS_BLOCK, "x"), (MONO_BLOCK, "m")):
        templates += [
            Template(block + i, slots, "C") for i, slots in enumerate(_cluster_expansions(suffix))
        ]
    return templates


TEMPLATES: list[Template] = _build_templates()


class FeatureId(NamedTuple):
    """Template id plus the 64-bit hash of the template's instantiated values."""

    template_id: int
    payload: int


def family_of(template_id: int) -> str:
    for family, id_range in FAMILY_RANGES.items():
        if template_id in id_range:
            return family
    raise ValueError(f"template id {template_id} outside every family range")


@dataclass(frozen=True)
class TemplateSet:
    """Which template families are active.

    Attributes:
        families: Subset of {"P", "C", "L"}; {"P"} alone is the delexicalized model.
        cluster_expansions: Emit the ``C`` block when ``C`` is enabled.
    """

    families: frozenset[str] = frozenset(FAMILIES)
    cluster_expansions: bool = True

    def __post_init__(self):
        unknown = set(self.families) - set(FAMILIES)
        if unknown or "P" not in self.families:
            raise ValueError(f"invalid feature families {sorted(self.families)}")
        object.__setattr__(self, "families", frozenset(self.families))

    @classmethod
    def delexicalized(cls) -> "TemplateSet":
        return cls(frozenset({"P"}))

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "TemplateSet":
        return cls(frozenset(names))

    @property
    def is_delexicalized(self) -> bool:
        return self.families == frozenset({"P"})

    @property
    def templates(self) -> list[Template]:
        active = set(self.families)
        if not self.cluster_expansions:
            active.discard("C")
        return [t for t in TEMPLATES if t.family in active]


@dataclass(frozen=True)
class ClusterSet:
    """The clusterings available to the ``C`` templates."""

    cross: Clustering | None = None
    mono: Clustering | None = None

    def __bool__(self) -> bool:
        return self.cross is not None or self.mono is not None


def cluster_prefix(bitstring: str, level: int) -> str:
    """First ``level`` bits of a cluster path (the whole path if shorter).

    Raises:
        ValueError: ``level`` < 1 or the bit-string is empty.
    """
    if level < 1:
        raise ValueError(f"cluster level must be >= 1, got {level}")
    if not bitstring:
        raise ValueError("empty cluster bit-string")
    return bitstring[:level]


def _children(config: Configuration, head: int) -> tuple[list[int], list[int]]:
    left, right = [], []
    for modifier, attached in enumerate(config.heads):
        if modifier and attached == head:
            (left if modifier < head else right).append(modifier)
    return left, right


def _context(config: Configuration) -> tuple:
    """Positions and arc facts the templates read, as a hashable tuple."""
    stack = config.stack
    n = config.n
    s0 = stack[-1]
    s1 = stack[-2] if len(stack) > 1 else None
    s2 = stack[-3] if len(stack) > 2 else None
    buffer = [i if i <= n else None for i in range(config.front, config.front + 4)]
    b0 = buffer[0]
    s0h = config.heads[s0] if s0 != ROOT else None
    s0hh = config.heads[s0h] if s0h else None
    s0_left, s0_right = _children(config, s0)
    b0_left, _ = _children(config, b0) if b0 is not None else ([], [])
    s0l = s0_left[0] if s0_left else None
    s0ll = s0_left[1] if len(s0_left) > 1 else None
    s0r = s0_right[-1] if s0_right else None
    s0rr = s0_right[-2] if len(s0_right) > 1 else None
    b0l = b0_left[0] if b0_left else None
    b0ll = b0_left[1] if len(b0_left) > 1 else None
    labels = config.labels
    return (
        s0, s1, s2, *buffer, s0h, s0hh, s0l, s0ll, s0r, s0rr, b0l, b0ll,
        len(s0_right), len(s0_left), len(b0_left),
        "+".join(sorted({labels[m] for m in s0_right})),
        "+".join(sorted({labels[m] for m in s0_left})),
        "+".join(sorted({labels[m] for m in b0_left})),
    )  # fmt: skip


_POSITIONS = (
    "s0", "s1", "s2", "b0", "b1", "b2", "b3", "s0h", "s0hh", "s0l", "s0ll", "s0r", "s0rr",
    "b0l", "b0ll",
)  # fmt: skip
_LABELLED = ("s0", "s0h", "s0l", "s0ll", "s0r", "s0rr", "b0l", "b0ll")


def _atoms(config: Configuration, context: tuple, clusters: ClusterSet | None) -> dict[str, str]:
    sentence = config.sentence
    labels = config.labels
    positions = dict(zip(_POSITIONS, context[: len(_POSITIONS)], strict=True))
    vr, vl, vlb, s0rset, s0lset, b0lset = context[len(_POSITIONS):]
    atoms: dict[str, str] = {}
    for name, index in positions.items():
        if index is None:
            continue
        if index == ROOT:
            atoms[name + "p"] = "<ROOT>"
            continue
        token = sentence[index]
        atoms[name + "p"] = token.upos
        if token.lexform is not None:
            atoms[name + "w"] = token.lexform
            atoms[name + "wp"] = f"{token.lexform}/{token.upos}"
    for name in _LABELLED:
        index = positions[name]
        if index:
            label = labels[index]
            if label is not None:
                atoms[name + "L"] = label
    s0, b0 = positions["s0"], positions["b0"]
    atoms["vr"] = str(vr)
    atoms["vl"] = str(vl)
    atoms["s0rset"] = s0rset
    atoms["s0lset"] = s0lset
    if b0 is not None:
        atoms["vlb"] = str(vlb)
        atoms["b0lset"] = b0lset
        atoms["d"] = str(min(b0 - s0, DISTANCE_CAP))
    if clusters:
        for name, index in (("s0", s0), ("b0", b0)):
            if not index:
                continue
            token = sentence[index]
            for suffix, clustering, key in (
                ("x", clusters.cross, token.form),
                ("m", clusters.mono, token.lexform),
            ):
                if clustering is None or key is None:
                    continue
                path = clustering.lookup(key)
                if path is None:
                    continue
                for level in CLUSTER_LEVELS:
                    atoms[f"{name}c{level}{suffix}"] = cluster_prefix(path, level)
                atoms[f"{name}cf{suffix}"] = path
                atoms[f"{name}cfp{suffix}"] = f"{path}/{token.upos}"
    return atoms


def _instantiate(
    templates: Sequence[Template], atoms: dict[str, str], with_text: bool = False
) -> list:
    features = []
    for template in templates:
        values = []
        for slot in template.slots:
            value = atoms.get(slot)
            if value is None:
                break
            values.append(value)
        else:
            payload = "\x1f".join(values)
            feature = FeatureId(template.template_id, stable_hash64(payload))
            if with_text:
                features.append((feature, f"{template.name}={'|'.join(values)}"))
            else:
                features.append(feature)
    return features


def extract_features(
    config: Configuration, templates: TemplateSet, clusters: ClusterSet | None = None
) -> list[FeatureId]:
    """Features of a configuration under the active templates.

    Missing data (no lexical form, a word outside a clustering, an empty stack
    position) only removes the templates that would read it.
    """
    atoms = _atoms(config, _context(config), clusters)
    return _instantiate(templates.templates, atoms)


def describe_features(
    config: Configuration, templates: TemplateSet, clusters: ClusterSet | None = None
) -> list[tuple[FeatureId, str]]:
    """Like `extract_features`, paired with a readable ``template=values`` string."""
    atoms = _atoms(config, _context(config), clusters)
    return _instantiate(templates.templates, atoms, with_text=True)


class FeatureExtractor:
    """`extract_features` with a per-sentence memo keyed on the configuration context.

    Beam items over the same sentence often share every fact the templates read;
    the memo returns the already instantiated list for those. Not shared between
    threads.
    """

    def __init__(self, templates: TemplateSet, clusters: ClusterSet | None = None):
        self.templates = templates.templates
        self.clusters = clusters
        self._sentence = None
        self._memo: dict[tuple, list[FeatureId]] = {}

    def __call__(self, config: Configuration) -> list[FeatureId]:
        if config.sentence is not self._sentence:
            self._sentence = config.sentence
            self._memo = {}
        context = _context(config)
        features = self._memo.get(context)
        if features is None:
            features = _instantiate(self.templates, _atoms(config, context, self.clusters))
            self._memo[context] = features
        return features


@dataclass
class WeightVector:
    """Perceptron weights with lazily averaged accumulators.

    Weights are indexed by (feature, action code). Each entry holds
    ``[raw, total, stamp]``: ``total`` sums the raw value over the training
    instances before ``stamp``, the first instance that sees the current ``raw``.
    The averaged weight after ``clock`` instances is therefore
    ``(total + raw * (clock - stamp + 1)) / clock``. Weights that are set rather
    than learned (loaded or frozen) count from instance 1, so averaging keeps
    them until an update changes them.
    """

    table: dict[FeatureId, dict[int, list[float]]] = field(default_factory=dict)
    clock: int = 0

    def __len__(self) -> int:
        return sum(len(row) for row in self.table.values())

    def tick(self) -> None:
        """Start the next training instance."""
        self.clock += 1

    def raw(self, feature: FeatureId, code: int) -> float:
        entry = self.table.get(feature, {}).get(code)
        return 0.0 if entry is None else entry[0]

    def averaged(self, feature: FeatureId, code: int) -> float:
        entry = self.table.get(feature, {}).get(code)
        if entry is None:
            return 0.0
        return self._averaged_entry(entry)

    def _averaged_entry(self, entry: list[float]) -> float:
        if self.clock == 0:
            return entry[0]
        raw, total, stamp = entry
        return (total + raw * (self.clock - stamp + 1)) / self.clock

    def update(self, feature: FeatureId, code: int, delta: float) -> None:
        row = self.table.setdefault(feature, {})
        entry = row.get(code)
        if entry is None:
            row[code] = [delta, 0.0, self.clock]
            return
        raw, total, stamp = entry
        entry[1] = total + raw * (self.clock - stamp)
        entry[0] = raw + delta
        entry[2] = self.clock

    def set(self, feature: FeatureId, code: int, value: float) -> None:
        """Set a raw weight directly (model loading, tests)."""
        self.table.setdefault(feature, {})[code] = [value, 0.0, max(self.clock, 1)]

    def action_scores(self, features: Iterable[FeatureId]) -> dict[int, float]:
        """Sum of raw weights per action code over ``features``."""
        scores: dict[int, float] = {}
        table = self.table
        for feature in features:
            row = table.get(feature)
            if row:
                for code, entry in row.items():
                    scores[code] = scores.get(code, 0.0) + entry[0]
        return scores

    def averaged_copy(self) -> "WeightVector":
        """Frozen vector whose raw weights are the averaged ones (zeros dropped)."""
        frozen = WeightVector()
        for feature, row in self.table.items():
            for code, entry in row.items():
                value = self._averaged_entry(entry)
                if value != 0.0:
                    frozen.table.setdefault(feature, {})[code] = [value, 0.0, 1]
        return frozen

    def copy(self) -> "WeightVector":
        return WeightVector(
            {
                feature: {code: list(entry) for code, entry in row.items()}
                for feature, row in self.table.items()
            },
            self.clock,
        )

    def records(self) -> list[tuple[int, int, int, float]]:
        """(template id, payload, action code, averaged weight), sorted."""
        return sorted(
            (feature.template_id, feature.payload, code, self._averaged_entry(entry))
            for feature, row in self.table.items()
            for code, entry in row.items()
        )


def score(
    weights: WeightVector, features: Iterable[FeatureId], code: int, averaged: bool = False
) -> float:
    """Sum of the (raw or averaged) weights of ``features`` for action ``code``.

    Features without a weight contribute 0.
    """
    lookup = weights.averaged if averaged else weights.raw
    return sum(lookup(feature, code) for feature in features)
