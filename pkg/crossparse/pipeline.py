"""End-to-end transfer experiments.

This module provides the TransferPipeline class which runs one experiment
configuration from raw inputs to an evaluation report, writing every
intermediate artifact and a manifest into a run directory.

Example:
    >>> from crossparse.config import ExperimentConfig
    >>> from crossparse.pipeline import TransferPipeline
    >>> pipeline = TransferPipeline(ExperimentConfig.load("density.cfg"))
    >>> report = pipeline.run()
"""

import logging
import platform
import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import asdict
from os import environ
from pathlib import Path

import numpy as np

from crossparse import DEFAULT_RUN_ROOT, __version__
from crossparse.alignment import (
    AlignedPair,
    TranslationLexicon,
    compose_lexicons,
    extract_lexicon,
    read_pharaoh,
    reverse_pairs,
    symmetrize,
    write_lexicon,
    write_pharaoh,
)
from crossparse.clustering import Clustering, read_clusters, write_clusters
from crossparse.config import ExperimentConfig
from crossparse.evaluation import EvalReport, format_report, report_to_tsv, score
from crossparse.exception import DataError
from crossparse.features import TEMPLATE_VERSION, ClusterSet, TemplateSet
from crossparse.helper import file_digest, write_manifest
from crossparse.perceptron import Model, parse_treebank, save_model, train
from crossparse.transfer import (
    TransferConfig,
    build_codeswitch_clusters,
    density_train,
    lexicalize,
    merge_tiers,
    project_corpus,
    read_wals_csv,
    select_sources,
    self_lexicalize,
    self_train,
)
from crossparse.treebank import (
    MonolingualCorpus,
    PartialTree,
    Sentence,
    Treebank,
    concatenate,
    read_conllu,
    read_tokenized_corpus,
    write_conllu,
    write_partial_trees,
    write_tokenized_corpus,
)

logger = logging.getLogger(__name__)


def read_treebank(path: str | Path, language: str) -> Treebank:
    with open(path, encoding="utf-8") as file:
        return read_conllu(file, language)


def read_cluster_file(path: str | Path) -> Clustering:
    with open(path, encoding="utf-8") as file:
        return read_clusters(file)


def default_run_dir(config: ExperimentConfig) -> Path:
    """``$CROSSPARSE_RUN_ROOT/<mode>-<target>-seed<seed>``."""
    root = Path(environ.get("CROSSPARSE_RUN_ROOT") or DEFAULT_RUN_ROOT)
    mode = config.mode.replace("+", "_")
    return root / f"{mode}-{config.target}-seed{config.transfer.seed}"


class TransferPipeline:
    """Runs one transfer experiment.

    The stages run sequentially; ``threads`` only parallelizes decoding and EM
    inside a stage.

    Attributes:
        config: The validated experiment configuration.
        run_dir: Directory receiving every artifact and ``manifest.json``.
        command: Command line recorded in the manifest.
        sources: Source languages, after WALS selection if none were given.
        timings: Seconds spent per stage.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        run_dir: str | Path | None = None,
        threads: int | None = None,
        command: Sequence[str] = (),
    ):
        config.validate()
        self.config = config
        if threads is not None:
            config.transfer.threads = threads
        self.run_dir = Path(run_dir) if run_dir else default_run_dir(config)
        self.command = list(command)
        self.sources: list[str] = []
        self.timings: dict[str, float] = {}
        self.artifacts: list[str] = []
        self._aligned: dict[str, list[AlignedPair]] = {}
        self._lexicons: dict[tuple[str, str], TranslationLexicon] = {}

    @property
    def transfer(self) -> TransferConfig:
        return self.config.transfer

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Time a stage and log its start and duration."""
        logger.info("stage %s", name)
        started = time.perf_counter()
        yield
        self.timings[name] = round(time.perf_counter() - started, 3)
        logger.info("stage %s done in %.1fs", name, self.timings[name])

    def _path(self, name: str) -> Path:
        path = self.run_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(name)
        return path

    def resolve_sources(self) -> list[str]:
        """The configured sources, or those WALS selects among the available treebanks."""
        if self.config.sources:
            return list(self.config.sources)
        with open(self.config.wals, encoding="utf-8") as file:
            profiles = read_wals_csv(file)
        selected = select_sources(self.config.target, profiles, self.transfer.wals_threshold)
        missing = [language for language in selected if language not in self.config.treebanks]
        if missing:
            logger.warning("no treebank for selected sources %s, skipping them", missing)
        sources = [language for language in selected if language in self.config.treebanks]
        if not sources:
            raise DataError(
                f"no source language with a treebank qualifies for {self.config.target}"
            )
        return sources

    def source_treebanks(self) -> dict[str, Treebank]:
        return {
            language: read_treebank(self.config.treebanks[language], language)
            for language in self.sources
        }

    def parallel_sentences(self, source: str) -> tuple[Treebank, Treebank]:
        source_path, target_path = self.config.parallel[source]
        return (
            read_treebank(source_path, source),
            read_treebank(target_path, self.config.target),
        )

    def aligned(self, source: str) -> list[AlignedPair]:
        """Intersected word alignments of the parallel data for ``source``.

        Links come from the configured Pharaoh file when there is one, otherwise from
        IBM Model 1 trained in both directions.
        """
        if source in self._aligned:
            return self._aligned[source]
        source_side, target_side = self.parallel_sentences(source)
        if len(source_side) != len(target_side):
            raise DataError(
                f"parallel data for {source} has {len(source_side)} source and "
                f"{len(target_side)} target sentences"
            )
        pairs = [(s.forms, t.forms) for s, t in zip(source_side, target_side, strict=True)]
        if source in self.config.alignments:
            with open(self.config.alignments[source], encoding="utf-8") as file:
                links = read_pharaoh(file, pairs)
            aligned = [
                AlignedPair(s, t, sentence_links)
                for (s, t), sentence_links in zip(pairs, links, strict=True)
            ]
        else:
            aligned = symmetrize(pairs, self.transfer.ibm1_iterations, self.transfer.threads)
        name = f"align/{source}-{self.config.target}.pharaoh"
        with open(self._path(name), "w", encoding="utf-8") as file:
            write_pharaoh([pair.links for pair in aligned], file)
        self._aligned[source] = aligned
        return aligned

    def lexicon(self, src_lang: str, tgt_lang: str) -> TranslationLexicon:
        """Translation lexicon for an ordered language pair.

        Pairs of two source languages are translated through the target language.
        """
        key = (src_lang, tgt_lang)
        if key in self._lexicons:
            return self._lexicons[key]
        target = self.config.target
        if src_lang == target:
            aligned = reverse_pairs(self.aligned(tgt_lang))
            lexicon = extract_lexicon(aligned, src_lang, tgt_lang, self.transfer.max_len)
        elif tgt_lang == target:
            lexicon = extract_lexicon(
                self.aligned(src_lang), src_lang, tgt_lang, self.transfer.max_len
            )
        else:
            lexicon = compose_lexicons(
                self.lexicon(src_lang, target), self.lexicon(target, tgt_lang)
            )
        with open(self._path(f"lexicon/{src_lang}-{tgt_lang}.tsv"), "w", encoding="utf-8") as file:
            write_lexicon(lexicon, file)
        self._lexicons[key] = lexicon
        return lexicon

    def _can_build_clusters(self) -> bool:
        languages = [self.config.target, *self.sources]
        return all(language in self.config.monolingual for language in languages) and all(
            source in self.config.parallel for source in self.sources
        )

    def cluster_set(self) -> tuple[ClusterSet | None, dict[str, str]]:
        """The clusterings for the ``C`` templates and the files they live in.

        The cross-lingual clustering is read from the configured file, or built from
        the code-switched monolingual corpora when the inputs for it are configured.
        """
        refs: dict[str, str] = {}
        cross = mono = None
        if self.config.clusters is not None:
            cross = read_cluster_file(self.config.clusters)
            refs["cross"] = str(self.config.clusters)
        elif self._can_build_clusters():
            with self.stage("codeswitch-clusters"):
                cross = self.build_clusters()
            refs["cross"] = str(self.run_dir / "clusters.txt")
        if self.config.mono_clusters is not None:
            mono = read_cluster_file(self.config.mono_clusters)
            refs["mono"] = str(self.config.mono_clusters)
        if cross is None and mono is None:
            return None, refs
        return ClusterSet(cross=cross, mono=mono), refs

    def build_clusters(self) -> Clustering:
        languages = sorted([self.config.target, *self.sources])
        corpora: dict[str, MonolingualCorpus] = {}
        for language in languages:
            with open(self.config.monolingual[language], encoding="utf-8") as file:
                corpora[language] = read_tokenized_corpus(file, language, skip_comments=True)
        lexicons = {
            (a, b): self.lexicon(a, b) for a in languages for b in languages if a != b
        }
        clustering, mixed = build_codeswitch_clusters(
            corpora, lexicons, self.transfer, self.config.min_count
        )
        with open(self._path("codeswitch.txt"), "w", encoding="utf-8") as file:
            write_tokenized_corpus(mixed, file, mixed.header)
        with open(self._path("clusters.txt"), "w", encoding="utf-8") as file:
            write_clusters(clustering, file)
        return clustering

    def _model_init(
        self, templates: TemplateSet, clusters: ClusterSet | None, refs: dict[str, str]
    ) -> Model:
        return Model(
            templates=templates,
            beam_width=self.transfer.beam_width,
            clusters=clusters,
            cluster_refs=dict(refs),
        )

    def _train(self, model_init: Model, sentences: Sequence[Sentence]) -> Model:
        return train(
            model_init,
            sentences,
            self.transfer.epochs,
            self.transfer.seed,
            self.transfer.update,
        )

    def _maybe_self_train(
        self, model: Model, clusters: ClusterSet | None, refs: dict[str, str]
    ) -> Model:
        if self.config.target_corpus is None:
            return model
        with self.stage("self-train"):
            corpus = read_treebank(self.config.target_corpus, self.config.target)
            return self_train(model, self_lexicalize(corpus), self.transfer, clusters, refs)

    def lexicalized_sources(self, treebanks: dict[str, Treebank]) -> list[Sentence]:
        sentences: list[Sentence] = []
        for language, treebank in treebanks.items():
            lexicalized = lexicalize(treebank, self.lexicon(language, self.config.target))
            with open(
                self._path(f"lexicalized/{language}.conllu"), "w", encoding="utf-8"
            ) as file:
                write_conllu(lexicalized, file)
            sentences.extend(lexicalized)
        return sentences

    def project_sources(self, source_parser: Model) -> dict[int, list[PartialTree]]:
        """Parse the source side of every parallel corpus and project it to the target."""
        buckets = []
        for language in self.sources:
            source_side, target_side = self.parallel_sentences(language)
            aligned = self.aligned(language)
            parsed = parse_treebank(
                source_parser, self_lexicalize(source_side), threads=self.transfer.threads
            )
            tiered = project_corpus(
                parsed, list(target_side), [pair.links for pair in aligned], self.transfer.tiers
            )
            for tier, trees in tiered.items():
                name = f"projected/{language}-P{tier}.conllu"
                with open(self._path(name), "w", encoding="utf-8") as file:
                    write_partial_trees(trees, file)
            buckets.append(tiered)
        return merge_tiers(*buckets)

    def build_model(self) -> Model:
        """Train the parser the configured mode calls for."""
        mode = self.config.mode
        with self.stage("read-treebanks"):
            treebanks = self.source_treebanks()
            union = concatenate(treebanks.values(), "+".join(self.sources))
        delexicalized = self._model_init(TemplateSet.delexicalized(), None, {})

        if mode == "delex-baseline":
            with self.stage("train"):
                return self._train(delexicalized, union)

        if mode == "delex+selftrain":
            with self.stage("train"):
                model = self._train(delexicalized, union)
            clusters, refs = self.cluster_set()
            return self._maybe_self_train(model, clusters, refs)

        clusters, refs = self.cluster_set()
        if mode == "clusters":
            with self.stage("train"):
                model_init = self._model_init(TemplateSet(frozenset({"P", "C"})), clusters, refs)
                model = self._train(model_init, union)
            return self._maybe_self_train(model, clusters, refs)

        with self.stage("lexicalize"):
            seed_trees = self.lexicalized_sources(treebanks)
        if mode == "lexicalized":
            with self.stage("train"):
                model = self._train(self._model_init(TemplateSet(), clusters, refs), seed_trees)
            return self._maybe_self_train(model, clusters, refs)

        with self.stage("source-parser"):
            source_parser = self._train(
                self._model_init(TemplateSet(), None, {}), self_lexicalize(union)
            )
        with self.stage("project"):
            tiered = self.project_sources(source_parser)
        with self.stage("density-train"):
            return density_train(
                seed_trees, tiered, self.transfer, clusters, TemplateSet(), refs
            )

    def evaluate(self, model: Model) -> EvalReport:
        gold = read_treebank(self.config.test, self.config.target)
        parsed = parse_treebank(model, self_lexicalize(gold), threads=self.transfer.threads)
        with open(self._path("parsed.conllu"), "w", encoding="utf-8") as file:
            write_conllu(parsed, file)
        report = score(gold, parsed, self.config.exclude_punct)
        self._path("report.tsv").write_text(report_to_tsv(report), encoding="utf-8")
        self._path("report.txt").write_text(format_report(report), encoding="utf-8")
        return report

    def manifest(self, report: EvalReport) -> dict:
        return {
            "command": self.command,
            "mode": self.config.mode,
            "target": self.config.target,
            "treebank_family": self.config.treebank_family,
            "sources": self.sources,
            "inputs": {str(path): file_digest(path) for path in self.config.input_paths()},
            "seeds": {"seed": self.transfer.seed},
            "transfer": asdict(self.transfer),
            "versions": {
                "crossparse": __version__,
                "template_version": TEMPLATE_VERSION,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
            "timings": self.timings,
            "artifacts": sorted(set(self.artifacts)),
            "results": {"uas": report.uas, "las": report.las, "tokens": report.tokens},
        }

    def run(self) -> EvalReport:
        """Execute the experiment.

        Returns:
            The evaluation report on the target test treebank.
        """
        self.run_dir.mkdir(parents=True, exist_ok=True)
        logger.info("running %s for %s in %s", self.config.mode, self.config.target, self.run_dir)
        self.sources = self.resolve_sources()
        model = self.build_model()
        save_model(model, self._path("model.bin"))
        with self.stage("evaluate"):
            report = self.evaluate(model)
        write_manifest(self.run_dir, self.manifest(report))
        return report
