"""Beam-search decoding and averaged structured-perceptron training.

The decoder keeps the ``beam_width`` best action sequences at every step; the
trainer decodes each sentence with the current raw weights and, on a mistake,
updates at the prefix length where the best beam item outscores the gold prefix
by the most (max-violation), or at the first step the gold prefix leaves the beam
(early update).
"""

import io
import json
import logging
import struct
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np
from tqdm import tqdm

from crossparse import __version__
from crossparse.exception import DataError, ModelFormatError, UsageError
from crossparse.features import (
    TEMPLATE_VERSION,
    ClusterSet,
    FeatureExtractor,
    FeatureId,
    TemplateSet,
    WeightVector,
    family_of,
)
from crossparse.helper import make_rng
from crossparse.transition import (
    Action,
    ActionCodec,
    ArcConstraints,
    Configuration,
    apply,
    config_to_tree,
    expand_actions,
    initial_config,
    oracle_sequence,
)
from crossparse.treebank import Sentence, Treebank, is_projective, validate_tree

logger = logging.getLogger(__name__)

DEFAULT_BEAM_WIDTH = 8
UPDATE_STRATEGIES = ("max-violation", "early")
FALLBACK_LABEL = "dep"

MODEL_MAGIC = b"XPARSEMD"
FORMAT_VERSION = 1
RECORD_DTYPE = np.dtype(
    [("template", "<u4"), ("payload", "<u8"), ("action", "<u4"), ("weight", "<f8")]
)


@dataclass
class Model:
    """A linear arc-eager parsing model.

    Attributes:
        weights: Feature weights per action code.
        templates: Active template families.
        labels: Dependency label alphabet; fixes the action codes.
        cluster_refs: Clustering name ("cross"/"mono") -> file it was read from.
        beam_width: Default beam width for decoding.
        metadata: Training provenance.
        clusters: The loaded clusterings (not serialized; see ``cluster_refs``).
    """

    weights: WeightVector = field(default_factory=WeightVector)
    templates: TemplateSet = field(default_factory=TemplateSet.delexicalized)
    labels: list[str] = field(default_factory=list)
    cluster_refs: dict[str, str] = field(default_factory=dict)
    beam_width: int = DEFAULT_BEAM_WIDTH
    metadata: dict = field(default_factory=dict)
    clusters: ClusterSet | None = None

    def __post_init__(self):
        if self.beam_width < 1:
            raise UsageError(f"beam width must be >= 1, got {self.beam_width}")

    @property
    def codec(self) -> ActionCodec:
        return ActionCodec(self.labels)

    def feature_extractor(self) -> FeatureExtractor:
        return FeatureExtractor(self.templates, self.clusters)

    def feature_counts(self) -> dict[str, int]:
        """Number of non-zero weights per template family."""
        counts = Counter(family_of(feature.template_id) for feature in self.weights.table)
        return {family: counts.get(family, 0) for family in ("P", "C", "L")}


@dataclass
class BeamItem:
    """A partial parse: configuration, action history and summed score."""

    config: Configuration
    history: tuple[Action, ...] = ()
    score: float = 0.0


def sequence_score(model: Model, sentence: Sentence, actions: Iterable[Action]) -> float:
    """Sum of per-action scores along ``actions`` from the initial configuration."""
    codec = model.codec
    extractor = model.feature_extractor()
    config = initial_config(sentence)
    total = 0.0
    for action in actions:
        total += model.weights.action_scores(extractor(config)).get(codec.encode(action), 0.0)
        config = apply(config, action)
    return total


def _advance(
    beam: list[BeamItem],
    model: Model,
    codec: ActionCodec,
    extractor: FeatureExtractor,
    constraints: ArcConstraints | None,
    width: int,
) -> list[BeamItem]:
    # (negated score, action code, parent rank) orders candidates; finished items
    # compete with code -1.
    candidates: list[tuple[float, int, int, BeamItem, Action | None]] = []
    for rank, item in enumerate(beam):
        if item.config.is_terminal:
            candidates.append((-item.score, -1, rank, item, None))
            continue
        scores = model.weights.action_scores(extractor(item.config))
        for action in expand_actions(item.config, codec, constraints):
            code = codec.encode(action)
            candidates.append((-(item.score + scores.get(code, 0.0)), code, rank, item, action))
    candidates.sort(key=lambda candidate: candidate[:3])
    successors = []
    for negated, _, _, item, action in candidates[:width]:
        if action is None:
            successors.append(item)
        else:
            successors.append(
                BeamItem(apply(item.config, action), item.history + (action,), -negated)
            )
    return successors


def beam_decode(
    model: Model,
    sentence: Sentence,
    constraints: ArcConstraints | None = None,
    beam_width: int | None = None,
) -> tuple[Sentence, float]:
    """Parse ``sentence`` with beam search.

    Ties are broken by action code (SHIFT < REDUCE < LEFT_ARC < RIGHT_ARC, labels in
    alphabet order), then by the rank of the parent item. Tokens left without a head
    attach to ROOT with label ``dep``.

    Args:
        model: The scoring model; its weights are read, never written.
        sentence: A POS-tagged sentence.
        constraints: Required arcs restricting the legal actions.
        beam_width: Overrides ``model.beam_width``.

    Returns:
        The parsed copy of the sentence and the score of its action sequence.
    """
    width = model.beam_width if beam_width is None else beam_width
    if width < 1:
        raise UsageError(f"beam width must be >= 1, got {width}")
    codec = model.codec
    extractor = model.feature_extractor()
    beam = [BeamItem(initial_config(sentence))]
    while not all(item.config.is_terminal for item in beam):
        beam = _advance(beam, model, codec, extractor, constraints, width)
    best = beam[0]
    if logger.isEnabledFor(logging.DEBUG):
        rescored = sequence_score(model, sentence, best.history)
        assert abs(rescored - best.score) < 1e-6, (rescored, best.score)
    return config_to_tree(best.config, FALLBACK_LABEL), best.score


def greedy_decode(
    model: Model, sentence: Sentence, constraints: ArcConstraints | None = None
) -> tuple[Sentence, float]:
    """Take the best-scoring legal action at every step (ties as in `beam_decode`)."""
    codec = model.codec
    extractor = model.feature_extractor()
    config = initial_config(sentence)
    total = 0.0
    while not config.is_terminal:
        scores = model.weights.action_scores(extractor(config))
        best_key, best_action = None, None
        for action in expand_actions(config, codec, constraints):
            code = codec.encode(action)
            key = (-scores.get(code, 0.0), code)
            if best_key is None or key < best_key:
                best_key, best_action = key, action
        total -= best_key[0]
        config = apply(config, best_action)
    return config_to_tree(config, FALLBACK_LABEL), total


def parse_treebank(
    model: Model,
    sentences: Iterable[Sentence],
    constraints: Sequence[ArcConstraints | None] | None = None,
    threads: int = 1,
    beam_width: int | None = None,
) -> list[Sentence]:
    """Decode every sentence; ``threads`` > 1 decodes concurrently, order preserved."""
    sentences = list(sentences)
    if constraints is None:
        constraints = [None] * len(sentences)

    def decode(pair: tuple[Sentence, ArcConstraints | None]) -> Sentence:
        return beam_decode(model, pair[0], pair[1], beam_width)[0]

    show = logger.isEnabledFor(logging.INFO)
    pairs = list(zip(sentences, constraints, strict=True))
    if threads <= 1:
        return [decode(pair) for pair in tqdm(pairs, desc="parse", disable=not show)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(tqdm(pool.map(decode, pairs), total=len(pairs), desc="parse", disable=not show))


def _trainable(treebank: Iterable[Sentence], single_root: bool) -> list[Sentence]:
    kept = []
    skipped = Counter()
    for sentence in treebank:
        if not sentence.has_full_tree():
            skipped["incomplete"] += 1
            continue
        try:
            validate_tree(sentence, single_root=single_root)
        except DataError:
            skipped["invalid"] += 1
            continue
        if not is_projective(sentence):
            skipped["non-projective"] += 1
            continue
        kept.append(sentence)
    for reason, count in sorted(skipped.items()):
        logger.warning("skipped %i %s training sentences", count, reason)
    return kept


def _collect(
    deltas: Counter,
    model: Model,
    codec: ActionCodec,
    extractor: FeatureExtractor,
    sentence: Sentence,
    actions: Sequence[Action],
    sign: int,
) -> None:
    config = initial_config(sentence)
    for action in actions:
        code = codec.encode(action)
        for feature in extractor(config):
            deltas[(feature, code)] += sign
        config = apply(config, action)


def _train_instance(
    model: Model,
    codec: ActionCodec,
    extractor: FeatureExtractor,
    sentence: Sentence,
    gold: Sequence[Action],
    update: str,
) -> bool:
    """Decode one sentence and update on a mistake; returns whether it updated."""
    gold = tuple(gold)
    gold_score = 0.0
    gold_config = initial_config(sentence)
    beam = [BeamItem(gold_config)]
    violations: list[tuple[float, int, BeamItem, int]] = []
    fell_off = False
    step = 0
    while not all(item.config.is_terminal for item in beam):
        if step < len(gold):
            scores = model.weights.action_scores(extractor(gold_config))
            gold_score += scores.get(codec.encode(gold[step]), 0.0)
            gold_config = apply(gold_config, gold[step])
        beam = _advance(beam, model, codec, extractor, None, model.beam_width)
        step += 1
        prefix = gold[:step]
        best = beam[0]
        if best.history != prefix:
            violations.append((best.score - gold_score, step, best, len(prefix)))
        if not any(item.history == prefix for item in beam):
            fell_off = True
            if update == "early":
                break
    if not fell_off and beam[0].history == gold:
        return False
    if update == "early" and fell_off:
        _, _, best, length = violations[-1]
    else:
        # Largest violation; the earliest step on ties.
        _, _, best, length = max(violations, key=lambda v: (v[0], -v[1]))
    deltas: Counter = Counter()
    _collect(deltas, model, codec, extractor, sentence, gold[:length], +1)
    _collect(deltas, model, codec, extractor, sentence, best.history, -1)
    for (feature, code), delta in deltas.items():
        if delta:
            model.weights.update(feature, code, float(delta))
    return True


def train(
    model_init: Model,
    treebank: Treebank | Sequence[Sentence],
    epochs: int = 3,
    seed: int = 0,
    update: str = "max-violation",
    beam_width: int | None = None,
    single_root: bool = True,
) -> Model:
    """Train with the averaged structured perceptron.

    Sentences without a full valid projective tree are skipped (and counted in the
    log). Sentence order is shuffled per epoch with a generator seeded by ``seed``.
    ``model_init``'s weights are the starting point and are not modified.

    Args:
        model_init: Templates, clusterings, beam width and optional starting weights.
        treebank: Training sentences with gold trees.
        epochs: Passes over the data; 0 returns ``model_init`` unchanged.
        seed: Shuffle seed.
        update: ``"max-violation"`` or ``"early"``.
        beam_width: Overrides ``model_init.beam_width``.
        single_root: Skip trees with more than one token attached to ROOT.

    Returns:
        A new model holding the averaged weights.

    Raises:
        DataError: The treebank is empty or has no trainable sentence.
        UsageError: Unknown update strategy, or starting weights with a different
            label alphabet.
    """
    if update not in UPDATE_STRATEGIES:
        raise UsageError(f"unknown update strategy {update!r}")
    if epochs == 0:
        return model_init
    sentences = list(treebank)
    if not sentences:
        raise DataError("cannot train on an empty treebank")
    sentences = _trainable(sentences, single_root)
    if not sentences:
        raise DataError("no trainable sentences (full projective trees) in the treebank")

    labels = sorted(
        {token.deprel or FALLBACK_LABEL for sentence in sentences for token in sentence}
        | set(model_init.labels)
    )
    if len(model_init.weights) and labels != model_init.labels:
        raise UsageError("training data adds labels to a model that already has weights")
    model = Model(
        weights=model_init.weights.copy(),
        templates=model_init.templates,
        labels=labels,
        cluster_refs=dict(model_init.cluster_refs),
        beam_width=model_init.beam_width if beam_width is None else beam_width,
        metadata=dict(model_init.metadata),
        clusters=model_init.clusters,
    )
    codec = model.codec
    extractor = model.feature_extractor()
    golds = [oracle_sequence(sentence) for sentence in sentences]
    rng = make_rng(seed)
    show = logger.isEnabledFor(logging.INFO)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(sentences))
        mistakes = 0
        for index in tqdm(order, desc=f"epoch {epoch}", disable=not show):
            model.weights.tick()
            mistakes += _train_instance(
                model, codec, extractor, sentences[index], golds[index], update
            )
        logger.info("epoch %i: %i/%i sentences updated", epoch, mistakes, len(sentences))

    model.weights = model.weights.averaged_copy()
    model.metadata.update(
        {
            "epochs": epochs,
            "seed": seed,
            "update": update,
            "sentences": len(sentences),
            "template_version": TEMPLATE_VERSION,
            "crossparse_version": __version__,
        }
    )
    return model


def _header(model: Model) -> dict:
    return {
        "template_version": TEMPLATE_VERSION,
        "families": sorted(model.templates.families),
        "cluster_expansions": model.templates.cluster_expansions,
        "templates": [[t.template_id, t.name] for t in model.templates.templates],
        "labels": model.labels,
        "cluster_refs": model.cluster_refs,
        "beam_width": model.beam_width,
        "metadata": model.metadata,
    }


def save_model(model: Model, target: BinaryIO | str | Path) -> None:
    """Write a model: magic, format version, JSON header, weight records.

    Records are ``(template id, payload hash, action code, averaged weight)``
    rows of a little-endian numpy structured array, sorted.
    """
    if isinstance(target, (str, Path)):
        with open(target, "wb") as stream:
            save_model(model, stream)
        return
    header = json.dumps(_header(model), sort_keys=True).encode("utf-8")
    records = np.array(model.weights.records(), dtype=RECORD_DTYPE)
    target.write(MODEL_MAGIC)
    target.write(struct.pack("<IQ", FORMAT_VERSION, len(header)))
    target.write(header)
    target.write(struct.pack("<Q", len(records)))
    target.write(records.tobytes())


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise ModelFormatError(f"truncated model file while reading {what}")
    return data


def load_model(source: BinaryIO | str | Path | bytes, clusters: ClusterSet | None = None) -> Model:
    """Read a model written by `save_model`.

    Raises:
        ModelFormatError: Wrong magic, format or template version, unknown template
            table, or truncated data.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    if isinstance(source, (str, Path)):
        with open(source, "rb") as stream:
            return load_model(stream, clusters)
    if _read_exact(source, len(MODEL_MAGIC), "magic") != MODEL_MAGIC:
        raise ModelFormatError("not a crossparse model file")
    version, header_len = struct.unpack("<IQ", _read_exact(source, 12, "header"))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"model format version {version}, expected {FORMAT_VERSION}")
    try:
        header = json.loads(_read_exact(source, header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"corrupt model header: {e}") from None
    if header.get("template_version") != TEMPLATE_VERSION:
        raise ModelFormatError(
            f"template version {header.get('template_version')}, expected {TEMPLATE_VERSION}"
        )
    templates = TemplateSet(frozenset(header["families"]), header["cluster_expansions"])
    expected = [[t.template_id, t.name] for t in templates.templates]
    if header["templates"] != expected:
        raise ModelFormatError("template table does not match this build")
    (count,) = struct.unpack("<Q", _read_exact(source, 8, "record count"))
    data = _read_exact(source, count * RECORD_DTYPE.itemsize, "weight records")
    records = np.frombuffer(data, dtype=RECORD_DTYPE)
    weights = WeightVector()
    for template, payload, action, weight in records.tolist():
        weights.set(FeatureId(template, payload), action, weight)
    return Model(
        weights=weights,
        templates=templates,
        labels=list(header["labels"]),
        cluster_refs=dict(header["cluster_refs"]),
        beam_width=header["beam_width"],
        metadata=header["metadata"],
        clusters=clusters,
    )
