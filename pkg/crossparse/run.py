"""Command-line interface for crossparse.

Each step of a transfer experiment is a subcommand; ``pipeline`` runs a whole
experiment from one configuration file.

Example:
    $ crossparse fixtures --output-dir data
    $ crossparse pipeline --config data/delex-baseline.cfg
    $ crossparse eval --gold gold.conllu --pred parsed.conllu
    $ crossparse --threads 4 parse --model model.bin --input test.conllu --out parsed.conllu

Environment Variables:
    CROSSPARSE_RUN_ROOT: Root directory of pipeline run directories
    CROSSPARSE_THREADS: Default number of decoding / EM threads
    CROSSPARSE_LOG_LEVEL: Default log level (WARNING)

Errors end the process with one ``error code=<code> message=<message>`` line on
stderr and exit status 2 (usage), 3 (data) or 4 (internal).
"""

import logging
import sys
import time
from argparse import ArgumentParser, Namespace
from collections.abc import Sequence
from os import environ
from pathlib import Path

from dotenv import load_dotenv

from crossparse import __version__
from crossparse.alignment import (
    AlignedPair,
    SentencePair,
    extract_lexicon,
    read_lexicon,
    read_parallel,
    read_pharaoh,
    symmetrize,
    write_lexicon,
    write_pharaoh,
)
from crossparse.clustering import (
    CodeSwitchSpec,
    brown_cluster,
    generate_codeswitch,
    read_clusters,
    write_clusters,
)
from crossparse.config import ExperimentConfig, strtobool
from crossparse.evaluation import discordant_counts, format_report, mcnemar_p, report_to_tsv, score
from crossparse.exception import CrossParseError, DataError, UsageError
from crossparse.features import ClusterSet, TemplateSet
from crossparse.helper import file_digest, read_manifest, write_manifest
from crossparse.perceptron import (
    UPDATE_STRATEGIES,
    Model,
    load_model,
    parse_treebank,
    save_model,
    train,
)
from crossparse.pipeline import TransferPipeline, read_cluster_file, read_treebank
from crossparse.synthetic import write_fixtures
from crossparse.transfer import (
    DEFAULT_TIERS,
    TransferConfig,
    lexicalize,
    project_corpus,
    read_wals_csv,
    select_sources,
    self_lexicalize,
    self_train,
)
from crossparse.treebank import (
    MonolingualCorpus,
    concatenate,
    read_tokenized_corpus,
    write_conllu,
    write_partial_trees,
    write_tokenized_corpus,
)

logger = logging.getLogger(__name__)


class CrossParseArgumentParser(ArgumentParser):
    """Argument parser whose errors become `UsageError` (one machine-parsable line)."""

    def error(self, message: str):
        raise UsageError(message)


def _int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(item) for item in value.split(",") if item.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {value!r}") from None


def _language_path(value: str) -> tuple[str, Path]:
    language, sep, path = value.partition("=")
    if not sep or not language or not path:
        raise UsageError(f"expected LANG=PATH, got {value!r}")
    return language, Path(path)


def _record_step(args: Namespace, inputs: Sequence[Path], outputs: Sequence[Path]) -> None:
    """Append this invocation to the manifest next to its first output."""
    run_dir = Path(outputs[0]).parent
    manifest = read_manifest(run_dir)
    manifest.setdefault("steps", []).append(
        {
            "command": args.command,
            "argv": args.argv,
            "inputs": {str(path): file_digest(path) for path in inputs},
            "outputs": [str(path) for path in outputs],
            "seed": getattr(args, "seed", None),
            "crossparse_version": __version__,
            "seconds": round(time.perf_counter() - args.started, 3),
        }
    )
    write_manifest(run_dir, manifest)


def _cluster_set(cross: Path | None, mono: Path | None) -> tuple[ClusterSet | None, dict]:
    refs = {}
    if cross:
        refs["cross"] = str(cross)
    if mono:
        refs["mono"] = str(mono)
    if not refs:
        return None, refs
    clusters = ClusterSet(
        cross=read_cluster_file(cross) if cross else None,
        mono=read_cluster_file(mono) if mono else None,
    )
    return clusters, refs


def _attach_clusters(args: Namespace, model: Model) -> Model:
    """Clusterings named on the command line, else those the model refers to."""
    if args.clusters or args.mono_clusters:
        model.clusters = _cluster_set(args.clusters, args.mono_clusters)[0]
        return model
    refs = model.cluster_refs
    model.clusters = _cluster_set(
        Path(refs["cross"]) if "cross" in refs else None,
        Path(refs["mono"]) if "mono" in refs else None,
    )[0]
    return model


def _transfer_config(args: Namespace) -> TransferConfig:
    return TransferConfig(
        epochs=args.epochs,
        beam_width=args.beam_width,
        seed=args.seed,
        update=args.update,
        threads=args.threads,
    )


def _read_pairs(args: Namespace) -> list[SentencePair]:
    with open(args.source_file, encoding="utf-8") as source, open(
        args.target_file, encoding="utf-8"
    ) as target:
        return read_parallel(source, target)


def cmd_align(args: Namespace) -> None:
    pairs = _read_pairs(args)
    if args.links:
        with open(args.links, encoding="utf-8") as file:
            links = read_pharaoh(file, pairs)
        inputs = [args.source_file, args.target_file, args.links]
    else:
        links = [pair.links for pair in symmetrize(pairs, args.iterations, args.threads)]
        inputs = [args.source_file, args.target_file]
    with open(args.out, "w", encoding="utf-8") as file:
        write_pharaoh(links, file)
    _record_step(args, inputs, [args.out])


def cmd_lexicon(args: Namespace) -> None:
    pairs = _read_pairs(args)
    with open(args.alignments, encoding="utf-8") as file:
        links = read_pharaoh(file, pairs)
    aligned = [AlignedPair(s, t, k) for (s, t), k in zip(pairs, links, strict=True)]
    lexicon = extract_lexicon(aligned, args.src_lang, args.tgt_lang, args.max_len)
    with open(args.out, "w", encoding="utf-8") as file:
        write_lexicon(lexicon, file)
    _record_step(args, [args.source_file, args.target_file, args.alignments], [args.out])


def cmd_codeswitch(args: Namespace) -> None:
    corpora: dict[str, MonolingualCorpus] = {}
    for language, path in args.corpus:
        with open(path, encoding="utf-8") as file:
            corpora[language] = read_tokenized_corpus(file, language, skip_comments=True)
    lexicons = {}
    for path in args.lexicon:
        with open(path, encoding="utf-8") as file:
            lexicon = read_lexicon(file)
        lexicons[(lexicon.src_lang, lexicon.tgt_lang)] = lexicon
    mixed = generate_codeswitch(CodeSwitchSpec(corpora, lexicons, args.alpha, args.seed))
    with open(args.out, "w", encoding="utf-8") as file:
        write_tokenized_corpus(mixed, file, mixed.header)
    _record_step(args, [path for _, path in args.corpus] + list(args.lexicon), [args.out])


def cmd_cluster(args: Namespace) -> None:
    if args.import_file:
        with open(args.import_file, encoding="utf-8") as file:
            clustering = read_clusters(file, args.lowercase, args.digits)
        inputs = [args.import_file]
    else:
        with open(args.corpus, encoding="utf-8") as file:
            corpus = read_tokenized_corpus(file, "und", skip_comments=True)
        clustering = brown_cluster(
            corpus,
            args.num_clusters,
            min_count=args.min_count,
            exact=args.exact,
            lowercase=args.lowercase,
            digits=args.digits,
        )
        inputs = [args.corpus]
    with open(args.out, "w", encoding="utf-8") as file:
        write_clusters(clustering, file)
    _record_step(args, inputs, [args.out])


def cmd_lexicalize(args: Namespace) -> None:
    treebank = read_treebank(args.treebank, args.language)
    with open(args.lexicon, encoding="utf-8") as file:
        lexicon = read_lexicon(file)
    with open(args.out, "w", encoding="utf-8") as file:
        write_conllu(lexicalize(treebank, lexicon), file)
    _record_step(args, [args.treebank, args.lexicon], [args.out])


def cmd_project(args: Namespace) -> None:
    source = read_treebank(args.source, args.source_lang)
    target = read_treebank(args.target, args.target_lang)
    with open(args.alignments, encoding="utf-8") as file:
        pairs = [(s.forms, t.forms) for s, t in zip(source, target, strict=True)]
        links = read_pharaoh(file, pairs)
    tiered = project_corpus(list(source), list(target), links, args.tiers)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for tier, trees in tiered.items():
        path = args.output_dir / f"{args.source_lang}-P{tier}.conllu"
        with open(path, "w", encoding="utf-8") as file:
            write_partial_trees(trees, file)
        outputs.append(path)
        print(f"P{tier}\t{len(trees)}")
    _record_step(args, [args.source, args.target, args.alignments], outputs)


def cmd_select_sources(args: Namespace) -> None:
    with open(args.wals, encoding="utf-8") as file:
        profiles = read_wals_csv(file)
    for language in select_sources(args.target, profiles, args.threshold):
        print(language)


def cmd_train(args: Namespace) -> None:
    try:
        templates = TemplateSet.from_names(f.strip() for f in args.families.split(","))
    except ValueError as e:
        raise UsageError(str(e)) from None
    clusters, refs = _cluster_set(args.clusters, args.mono_clusters)
    if "C" in templates.families and clusters is None:
        logger.warning("feature family C enabled without clusters; it will not fire")
    treebank = concatenate(
        [read_treebank(path, args.language) for path in args.treebank], args.language
    )
    sentences = self_lexicalize(treebank) if args.self_lexicalize else list(treebank)
    config = _transfer_config(args)
    model_init = Model(
        templates=templates, beam_width=config.beam_width, clusters=clusters, cluster_refs=refs
    )
    model = train(model_init, sentences, config.epochs, config.seed, config.update)
    save_model(model, args.out)
    _record_step(args, list(args.treebank), [args.out])


def cmd_parse(args: Namespace) -> None:
    model = _attach_clusters(args, load_model(args.model))
    sentences = self_lexicalize(read_treebank(args.input, args.language))
    parsed = parse_treebank(model, sentences, threads=args.threads, beam_width=args.beam_width)
    with open(args.out, "w", encoding="utf-8") as file:
        write_conllu(parsed, file)
    _record_step(args, [args.model, args.input], [args.out])


def cmd_eval(args: Namespace) -> None:
    gold = read_treebank(args.gold, "und")
    pred = read_treebank(args.pred, "und")
    report = score(gold, pred, args.exclude_punct)
    print(format_report(report), end="")
    if args.tsv:
        args.tsv.write_text(report_to_tsv(report), encoding="utf-8")
    if args.compare:
        other = read_treebank(args.compare, "und")
        b, c = discordant_counts(gold, pred, other, args.labeled, args.exclude_punct)
        p = mcnemar_p(b, c, exact=not args.chi2)
        print(f"mcnemar b={b} c={c} p={p:.6g}")


def cmd_selftrain(args: Namespace) -> None:
    clusters, refs = _cluster_set(args.clusters, args.mono_clusters)
    delex = load_model(args.model)
    corpus = self_lexicalize(read_treebank(args.corpus, args.language))
    model = self_train(delex, corpus, _transfer_config(args), clusters, refs)
    save_model(model, args.out)
    _record_step(args, [args.model, args.corpus], [args.out])


def cmd_pipeline(args: Namespace) -> None:
    config = ExperimentConfig.load(args.config)
    pipeline = TransferPipeline(config, args.run_dir, args.threads, ["crossparse", *args.argv])
    report = pipeline.run()
    print(format_report(report), end="")
    print(f"run directory: {pipeline.run_dir}")


def cmd_fixtures(args: Namespace) -> None:
    for path in write_fixtures(args.output_dir, args.seed):
        print(path)


def _add_training_flags(parser: ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=3, help="Perceptron epochs (default: 3)")
    parser.add_argument("--beam-width", type=int, default=8, help="Beam width (default: 8)")
    parser.add_argument("--seed", type=int, default=1, help="Shuffle seed (default: 1)")
    parser.add_argument(
        "--update",
        choices=UPDATE_STRATEGIES,
        default="max-violation",
        help="Perceptron update strategy (default: max-violation)",
    )


def _add_cluster_flags(parser: ArgumentParser) -> None:
    parser.add_argument("--clusters", type=Path, help="Cross-lingual cluster file")
    parser.add_argument("--mono-clusters", type=Path, help="Monolingual target cluster file")


def build_parser() -> ArgumentParser:
    """Build the argument parser; environment defaults are read here."""
    parser = CrossParseArgumentParser(
        prog="crossparse",
        description="Cross-lingual dependency parser transfer toolkit",
        epilog="Defaults can be provided via environment variables "
        "(CROSSPARSE_RUN_ROOT, CROSSPARSE_THREADS, CROSSPARSE_LOG_LEVEL).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default=environ.get("CROSSPARSE_LOG_LEVEL", "WARNING"),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
        help="Log level (or set CROSSPARSE_LOG_LEVEL env var)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=int(environ.get("CROSSPARSE_THREADS", "1")),
        help="Decoding / EM threads (default: 1, or CROSSPARSE_THREADS)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    align = commands.add_parser("align", help="Intersected IBM Model 1 alignments (Pharaoh)")
    align.add_argument("--source-file", type=Path, required=True, help="Tokenized source side")
    align.add_argument("--target-file", type=Path, required=True, help="Tokenized target side")
    align.add_argument("--links", type=Path, help="Ingest existing Pharaoh links instead")
    align.add_argument("--iterations", type=int, default=5, help="EM iterations (default: 5)")
    align.add_argument("--out", type=Path, required=True)
    align.set_defaults(handler=cmd_align)

    lexicon = commands.add_parser("lexicon", help="Translation lexicon from aligned text")
    lexicon.add_argument("--source-file", type=Path, required=True)
    lexicon.add_argument("--target-file", type=Path, required=True)
    lexicon.add_argument("--alignments", type=Path, required=True, help="Pharaoh links")
    lexicon.add_argument("--src-lang", required=True)
    lexicon.add_argument("--tgt-lang", required=True)
    lexicon.add_argument("--max-len", type=int, default=100, help="Longest pair (default: 100)")
    lexicon.add_argument("--out", type=Path, required=True)
    lexicon.set_defaults(handler=cmd_lexicon)

    codeswitch = commands.add_parser("codeswitch", help="Code-switched multilingual corpus")
    codeswitch.add_argument(
        "--corpus", type=_language_path, action="append", required=True, metavar="LANG=PATH"
    )
    codeswitch.add_argument("--lexicon", type=Path, action="append", default=[])
    codeswitch.add_argument("--alpha", type=float, default=0.3, help="Replacement probability")
    codeswitch.add_argument("--seed", type=int, default=1)
    codeswitch.add_argument("--out", type=Path, required=True)
    codeswitch.set_defaults(handler=cmd_codeswitch)

    cluster = commands.add_parser("cluster", help="Brown clustering (train or import)")
    source = cluster.add_mutually_exclusive_group(required=True)
    source.add_argument("--corpus", type=Path, help="Tokenized corpus to cluster")
    source.add_argument("--import-file", type=Path, help="Existing cluster file to import")
    cluster.add_argument("--num-clusters", type=int, default=500, help="K (default: 500)")
    cluster.add_argument("--min-count", type=int, default=1)
    cluster.add_argument("--exact", action="store_true", help="Merge over the full vocabulary")
    cluster.add_argument("--lowercase", action="store_true")
    cluster.add_argument("--digits", action="store_true", help="Map digits to 0")
    cluster.add_argument("--out", type=Path, required=True)
    cluster.set_defaults(handler=cmd_cluster)

    lexicalize_ = commands.add_parser("lexicalize", help="Attach translations to a treebank")
    lexicalize_.add_argument("--treebank", type=Path, required=True)
    lexicalize_.add_argument("--language", required=True)
    lexicalize_.add_argument("--lexicon", type=Path, required=True)
    lexicalize_.add_argument("--out", type=Path, required=True)
    lexicalize_.set_defaults(handler=cmd_lexicalize)

    project = commands.add_parser("project", help="Project parses and bucket by density tier")
    project.add_argument("--source", type=Path, required=True, help="Parsed source side")
    project.add_argument("--target", type=Path, required=True, help="Target side (CoNLL-U)")
    project.add_argument("--alignments", type=Path, required=True, help="Intersected links")
    project.add_argument("--source-lang", required=True)
    project.add_argument("--target-lang", required=True)
    project.add_argument(
        "--tiers",
        type=_int_list,
        default=DEFAULT_TIERS,
        help="Density tiers, decreasing (default: 100,90,80,70)",
    )
    project.add_argument("--output-dir", type=Path, required=True)
    project.set_defaults(handler=cmd_project)

    select = commands.add_parser("select-sources", help="WALS-based source selection")
    select.add_argument("--wals", type=Path, required=True, help="WALS CSV export")
    select.add_argument("--target", required=True)
    select.add_argument("--threshold", type=int, default=4, help="Shared properties (default 4)")
    select.set_defaults(handler=cmd_select_sources)

    train_ = commands.add_parser("train", help="Train a parser")
    train_.add_argument("--treebank", type=Path, action="append", required=True)
    train_.add_argument("--language", default="und")
    train_.add_argument(
        "--families", default="P", help="Feature families, e.g. 'P' or 'P,C,L' (default: P)"
    )
    train_.add_argument(
        "--self-lexicalize", action="store_true", help="Use each form as its lexical form"
    )
    _add_training_flags(train_)
    _add_cluster_flags(train_)
    train_.add_argument("--out", type=Path, required=True)
    train_.set_defaults(handler=cmd_train)

    parse = commands.add_parser("parse", help="Parse POS-tagged CoNLL-U")
    parse.add_argument("--model", type=Path, required=True)
    parse.add_argument("--input", type=Path, required=True)
    parse.add_argument("--language", default="und")
    parse.add_argument("--beam-width", type=int, help="Override the model's beam width")
    _add_cluster_flags(parse)
    parse.add_argument("--out", type=Path, required=True)
    parse.set_defaults(handler=cmd_parse)

    evaluate = commands.add_parser("eval", help="UAS/LAS and McNemar significance")
    evaluate.add_argument("--gold", type=Path, required=True)
    evaluate.add_argument("--pred", type=Path, required=True)
    evaluate.add_argument("--compare", type=Path, help="Second parse for a McNemar test")
    evaluate.add_argument(
        "--exclude-punct",
        type=str,
        default="n",
        help="Leave punctuation out | Options: 'y'/'yes', 'n'/'no' (default)",
    )
    evaluate.add_argument("--labeled", action="store_true", help="McNemar on head+label")
    evaluate.add_argument("--chi2", action="store_true", help="χ² instead of the exact test")
    evaluate.add_argument("--tsv", type=Path, help="Also write the TSV report here")
    evaluate.set_defaults(handler=cmd_eval)

    selftrain = commands.add_parser("selftrain", help="Self-train on a target corpus")
    selftrain.add_argument("--model", type=Path, required=True, help="Delexicalized model")
    selftrain.add_argument("--corpus", type=Path, required=True, help="POS-tagged CoNLL-U")
    selftrain.add_argument("--language", default="und")
    _add_training_flags(selftrain)
    _add_cluster_flags(selftrain)
    selftrain.add_argument("--out", type=Path, required=True)
    selftrain.set_defaults(handler=cmd_selftrain)

    pipeline = commands.add_parser("pipeline", help="Run a whole experiment from a config")
    pipeline.add_argument("--config", type=Path, required=True)
    pipeline.add_argument(
        "--run-dir", type=Path, help="Run directory (default: under CROSSPARSE_RUN_ROOT)"
    )
    pipeline.set_defaults(handler=cmd_pipeline)

    fixtures = commands.add_parser("fixtures", help="Write the bundled synthetic fixtures")
    fixtures.add_argument("--output-dir", type=Path, required=True)
    fixtures.add_argument("--seed", type=int, default=0)
    fixtures.set_defaults(handler=cmd_fixtures)
    return parser


def main(argv: Sequence[str] | None = None) -> None:
    """Main entry point for the crossparse CLI.

    Raises:
        SystemExit: With status 2, 3 or 4 when a subcommand fails.
    """
    load_dotenv()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
        )
        args.argv = argv
        args.started = time.perf_counter()
        if hasattr(args, "exclude_punct"):
            try:
                args.exclude_punct = bool(strtobool(args.exclude_punct))
            except ValueError:
                raise UsageError("Invalid value for --exclude-punct. Use 'y' or 'n'.") from None
        if args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
        args.handler(args)
    except CrossParseError as e:
        message = " ".join(e.message.split())
        print(f"error code={e.code} message={message}", file=sys.stderr)
        raise SystemExit(e.exit_status) from None
    except (OSError, ValueError) as e:
        print(f"error code={DataError.code} message={' '.join(str(e).split())}", file=sys.stderr)
        raise SystemExit(DataError.exit_status) from None
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        print(f"error code=internal message={' '.join(str(e).split())}", file=sys.stderr)
        raise SystemExit(CrossParseError.exit_status) from None


if __name__ == "__main__":
    main()
