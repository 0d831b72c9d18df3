"""Cross-lingual transfer: source selection, lexicalization, projection and the
density-driven and self-training trainers."""

import csv
import io
import logging
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import TextIO

from crossparse.alignment import Links, TranslationLexicon
from crossparse.clustering import (
    Clustering,
    CodeSwitchCorpus,
    CodeSwitchSpec,
    brown_cluster,
    generate_codeswitch,
)
from crossparse.exception import AlignmentError, DataError, UsageError
from crossparse.features import ClusterSet, TemplateSet
from crossparse.perceptron import DEFAULT_BEAM_WIDTH, Model, parse_treebank, train
from crossparse.transition import ArcConstraints
from crossparse.treebank import ROOT, MonolingualCorpus, PartialTree, Sentence, Treebank

logger = logging.getLogger(__name__)

WALS_FEATURES = ("82A", "83A", "85A", "86A", "87A", "88A")
WALS_FEATURE_NAMES = {
    "82A": "Order of subject and verb",
    "83A": "Order of object and verb",
    "85A": "Order of adposition and noun phrase",
    "86A": "Order of genitive and noun",
    "87A": "Order of adjective and noun",
    "88A": "Order of demonstrative and noun",
}
FULL_TIER = 100
DEFAULT_TIERS = (100, 90, 80, 70)


@dataclass(frozen=True)
class WalsProfile:
    """Word-order properties of one language; absent values are None."""

    language: str
    values: Mapping[str, str | None] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.values) - set(WALS_FEATURES)
        if unknown:
            raise DataError(f"unknown WALS features {sorted(unknown)} for {self.language}")
        object.__setattr__(
            self, "values", {feature: self.values.get(feature) or None for feature in WALS_FEATURES}
        )


def wals_matches(a: WalsProfile, b: WalsProfile) -> int:
    """Number of features where both values are present and equal."""
    return sum(
        1
        for feature in WALS_FEATURES
        if a.values[feature] is not None and a.values[feature] == b.values[feature]
    )


def read_wals_csv(stream: TextIO | str) -> dict[str, WalsProfile]:
    """Read a ``lang,82A,83A,85A,86A,87A,88A`` export; empty cells are absent values.

    Raises:
        DataError: The header lacks ``lang`` or one of the feature columns.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.DictReader(stream)
    missing = {"lang", *WALS_FEATURES} - set(reader.fieldnames or [])
    if missing:
        raise DataError(f"WALS CSV lacks columns {sorted(missing)}")
    profiles = {}
    for row in reader:
        language = row["lang"].strip()
        values = {feature: (row[feature] or "").strip() or None for feature in WALS_FEATURES}
        profiles[language] = WalsProfile(language, values)
    return profiles


def select_sources(
    target: str, profiles: Mapping[str, WalsProfile], threshold: int = 4
) -> list[str]:
    """Candidate languages sharing at least ``threshold`` word-order properties.

    Raises:
        DataError: No profile for ``target``.
    """
    if target not in profiles:
        raise DataError(f"no WALS profile for target language {target!r}")
    selected = []
    for language in sorted(profiles):
        if language == target:
            continue
        matches = wals_matches(profiles[target], profiles[language])
        logger.debug("%s shares %i WALS properties with %s", language, matches, target)
        if matches >= threshold:
            selected.append(language)
    logger.info("selected sources for %s: %s", target, ", ".join(selected) or "none")
    return selected


def lexicalize(treebank: Treebank, lexicon: TranslationLexicon) -> Treebank:
    """Copy of ``treebank`` whose lexical forms are the lexicon translations.

    Tokens the lexicon cannot translate get no lexical form.

    Raises:
        DataError: The lexicon translates from another language.
    """
    if lexicon.src_lang != treebank.language:
        raise DataError(
            f"lexicon translates {lexicon.src_lang}, treebank is {treebank.language}"
        )
    sentences = []
    untranslated = 0
    for sentence in treebank:
        tokens = []
        for token in sentence:
            lexform = lexicon.lookup(token.form)
            untranslated += lexform is None
            tokens.append(replace(token, lexform=lexform))
        sentences.append(Sentence(tokens, sentence.language, list(sentence.comments)))
    logger.info(
        "lexicalized %s into %s: %i of %i tokens without translation",
        treebank.language,
        lexicon.tgt_lang,
        untranslated,
        treebank.token_count,
    )
    return Treebank(sentences, treebank.language)


def self_lexicalize(sentences: Iterable[Sentence]) -> list[Sentence]:
    """Target-language sentences use their own form as lexical form."""
    return [
        Sentence([replace(t, lexform=t.form) for t in s], s.language, list(s.comments))
        for s in sentences
    ]


def project(source: Sentence, target: Sentence, links: Iterable[tuple[int, int]]) -> PartialTree:
    """Carry the source tree's arcs across 0-based (source, target) links.

    An arc h -> m is projected when both ends are linked; a ROOT attachment is
    projected onto the target token linked to the attached source token. At most one
    projected root is kept (the leftmost in the target); others lose their arc.

    Raises:
        DataError: The source tree is incomplete.
        AlignmentError: A token takes part in more than one link.
    """
    if not source.has_full_tree():
        raise DataError("cannot project an incomplete source tree")
    links = sorted(links)
    sources = Counter(i for i, _ in links)
    targets = Counter(j for _, j in links)
    if any(c > 1 for c in sources.values()) or any(c > 1 for c in targets.values()):
        raise AlignmentError("alignments not intersected")
    to_target = {i + 1: j + 1 for i, j in links}
    for i, j in to_target.items():
        if i > len(source) or j > len(target):
            raise AlignmentError(f"link {i - 1}-{j - 1} out of bounds")

    heads: list[int | None] = [None] * len(target)
    labels: list[str | None] = [None] * len(target)
    for token in source:
        modifier = to_target.get(token.index)
        if modifier is None:
            continue
        if token.head == ROOT:
            head = ROOT
        elif token.head in to_target:
            head = to_target[token.head]
        else:
            continue
        heads[modifier - 1] = head
        labels[modifier - 1] = token.deprel
    roots = [i for i, head in enumerate(heads) if head == ROOT]
    for extra in roots[1:]:
        heads[extra] = None
        labels[extra] = None
    if len(roots) > 1:
        logger.info("dropped %i extra projected roots", len(roots) - 1)
    return PartialTree.from_sentence(target.with_arcs(heads, labels))


@dataclass(frozen=True, order=True)
class DensityTier:
    """Trees with at least ``threshold`` percent of tokens attached; 100 means a
    full projective tree."""

    threshold: int

    @property
    def name(self) -> str:
        return f"P{self.threshold}"

    def admits(self, tree: PartialTree) -> bool:
        if self.threshold >= FULL_TIER:
            return tree.full_projective
        return tree.density >= Fraction(self.threshold, 100)


def _check_tiers(tiers: Sequence[int]) -> None:
    if not tiers:
        raise UsageError("at least one density tier is required")
    if any(not 0 < t <= FULL_TIER for t in tiers):
        raise UsageError(f"density tiers must lie in (0, 100]: {list(tiers)}")
    if any(a <= b for a, b in zip(tiers, tiers[1:], strict=False)):
        raise UsageError(f"density tiers must be strictly decreasing: {list(tiers)}")


def assign_tier(tree: PartialTree, tiers: Sequence[int] = DEFAULT_TIERS) -> int | None:
    """The highest tier whose criterion ``tree`` meets, or None."""
    _check_tiers(tiers)
    for threshold in tiers:
        if DensityTier(threshold).admits(tree):
            return threshold
    return None


@dataclass
class TransferConfig:
    """Settings shared by the transfer trainers.

    Attributes:
        wals_threshold: Minimum shared WALS properties (4 for the Google treebanks,
            5 for Universal Dependencies).
        tiers: Density tiers, strictly decreasing.
        epochs: Perceptron epochs per training stage.
        beam_width: Beam width for training and decoding.
        alpha: Code-switching replacement probability.
        seed: Seed for shuffling and code-switching.
        num_clusters: Brown clustering K.
        ibm1_iterations: EM iterations per alignment direction.
        max_len: Longest sentence pair used for the lexicon.
        update: Perceptron update strategy.
        threads: Decode / EM worker threads.
    """

    wals_threshold: int = 4
    tiers: tuple[int, ...] = DEFAULT_TIERS
    epochs: int = 3
    beam_width: int = DEFAULT_BEAM_WIDTH
    alpha: float = 0.3
    seed: int = 1
    num_clusters: int = 500
    ibm1_iterations: int = 5
    max_len: int = 100
    update: str = "max-violation"
    threads: int = 1

    def __post_init__(self):
        self.tiers = tuple(int(t) for t in self.tiers)
        _check_tiers(self.tiers)
        if not 0 <= self.wals_threshold <= len(WALS_FEATURES):
            raise UsageError(f"WALS threshold must lie in [0, 6], got {self.wals_threshold}")
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.epochs < 0 or self.beam_width < 1 or self.threads < 1:
            raise UsageError("epochs must be >= 0, beam width and threads >= 1")
        if self.num_clusters < 2 or self.ibm1_iterations < 1:
            raise UsageError("need K >= 2 clusters and at least one EM iteration")


def project_corpus(
    source_trees: Sequence[Sentence],
    target_sentences: Sequence[Sentence],
    links: Sequence[Links],
    tiers: Sequence[int] = DEFAULT_TIERS,
) -> dict[int, list[PartialTree]]:
    """Project every sentence pair and bucket the results by density tier.

    Target tokens get their own form as lexical form. Trees below the last tier
    are dropped.

    Raises:
        AlignmentError: The three inputs differ in length.
    """
    if not len(source_trees) == len(target_sentences) == len(links):
        raise AlignmentError(
            f"{len(source_trees)} source trees, {len(target_sentences)} target sentences, "
            f"{len(links)} link sets"
        )
    buckets: dict[int, list[PartialTree]] = {threshold: [] for threshold in tiers}
    dropped = 0
    for source, target, sentence_links in zip(source_trees, target_sentences, links, strict=True):
        (target,) = self_lexicalize([target])
        tree = project(source, target, sentence_links)
        tier = assign_tier(tree, tiers)
        if tier is None:
            dropped += 1
        else:
            buckets[tier].append(tree)
    logger.info(
        "projected %i sentences: %s, %i below the last tier",
        len(source_trees),
        ", ".join(f"P{t}={len(trees)}" for t, trees in buckets.items()),
        dropped,
    )
    return buckets


def merge_tiers(*buckets: Mapping[int, list[PartialTree]]) -> dict[int, list[PartialTree]]:
    """Pool tier buckets projected from several source languages."""
    merged: dict[int, list[PartialTree]] = {}
    for bucket in buckets:
        for tier, trees in bucket.items():
            merged.setdefault(tier, []).extend(trees)
    return merged


def _fresh_model(
    config: TransferConfig,
    templates: TemplateSet | None,
    clusters: ClusterSet | None,
    refs: Mapping[str, str] | None,
) -> Model:
    return Model(
        templates=templates or TemplateSet(),
        beam_width=config.beam_width,
        clusters=clusters,
        cluster_refs=dict(refs or {}),
    )


def density_train(
    seed_trees: Sequence[Sentence],
    tiered: Mapping[int, Sequence[PartialTree]],
    config: TransferConfig,
    clusters: ClusterSet | None = None,
    templates: TemplateSet | None = None,
    cluster_refs: Mapping[str, str] | None = None,
) -> Model:
    """Train on full trees, then complete and add progressively sparser projections.

    Stage 0 trains on the seed trees plus the full-tree tier. Each later tier, in
    decreasing order, is completed by constrained beam decoding with the current
    model, added to the pool, and a fresh model is trained on the whole pool.

    Raises:
        DataError: No full trees to start from.
    """
    pool = list(seed_trees) + [tree.sentence for tree in tiered.get(FULL_TIER, [])]
    if not pool:
        raise DataError("no full trees to initialize")
    model_init = _fresh_model(config, templates, clusters, cluster_refs)
    stages = [{"tier": FULL_TIER, "added": len(pool)}]
    logger.info("density stage P%i: training on %i full trees", FULL_TIER, len(pool))
    model = train(
        model_init, pool, config.epochs, config.seed, config.update, single_root=False
    )
    for tier in config.tiers:
        if tier >= FULL_TIER or not tiered.get(tier):
            continue
        trees = list(tiered[tier])
        constraints = [
            ArcConstraints.from_partial_tree(tree, labels=model.labels) for tree in trees
        ]
        completed = parse_treebank(
            model, [tree.sentence for tree in trees], constraints, threads=config.threads
        )
        pool.extend(completed)
        stages.append({"tier": tier, "added": len(completed)})
        logger.info(
            "density stage P%i: %i completed trees, pool %i", tier, len(completed), len(pool)
        )
        model = train(
            model_init, pool, config.epochs, config.seed, config.update, single_root=False
        )
    model.metadata["density_stages"] = stages
    return model


def self_train(
    delex_model: Model,
    corpus: Sequence[Sentence],
    config: TransferConfig,
    clusters: ClusterSet | None = None,
    cluster_refs: Mapping[str, str] | None = None,
) -> Model:
    """Parse the target corpus with ``delex_model`` and retrain on the output with
    every feature family.

    Raises:
        DataError: The corpus is empty.
    """
    corpus = list(corpus)
    if not corpus:
        raise DataError("self-training needs a non-empty target corpus")
    parsed = parse_treebank(delex_model, corpus, threads=config.threads)
    parsed = self_lexicalize(parsed)
    model = train(
        _fresh_model(config, TemplateSet(), clusters, cluster_refs),
        parsed,
        config.epochs,
        config.seed,
        config.update,
        single_root=False,
    )
    model.metadata["self_trained_on"] = len(parsed)
    return model


def build_codeswitch_clusters(
    corpora: Mapping[str, MonolingualCorpus],
    lexicons: Mapping[tuple[str, str], TranslationLexicon],
    config: TransferConfig,
    min_count: int = 1,
) -> tuple[Clustering, CodeSwitchCorpus]:
    """Generate the code-switched corpus and Brown-cluster it."""
    mixed = generate_codeswitch(CodeSwitchSpec(corpora, lexicons, config.alpha, config.seed))
    clustering = brown_cluster(mixed, config.num_clusters, min_count=min_count)
    return clustering, mixed
