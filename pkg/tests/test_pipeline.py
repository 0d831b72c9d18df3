"""Tests for pipeline module."""

import json
import re
from unittest.mock import patch

import pytest

from crossparse.config import ExperimentConfig
from crossparse.evaluation import score
from crossparse.features import TEMPLATE_VERSION, TemplateSet
from crossparse.perceptron import Model, load_model, parse_treebank, train
from crossparse.pipeline import TransferPipeline, default_run_dir, read_treebank
from crossparse.run import main
from crossparse.synthetic import FixtureSizes, write_fixtures


@pytest.fixture
def fixture_dir(tmp_path):
    """A small synthetic experiment."""
    directory = tmp_path / "data"
    sizes = FixtureSizes(train=60, test=30, corpus=40, parallel=80, monolingual=80)
    write_fixtures(directory, seed=0, sizes=sizes)
    return directory


def run(fixture_dir, run_dir, mode="delex-baseline", **overrides):
    config = ExperimentConfig.load(fixture_dir / f"{mode}.cfg")
    for name, value in overrides.items():
        setattr(config, name, value)
    pipeline = TransferPipeline(config, run_dir=run_dir, command=["crossparse", "run"])
    return pipeline, pipeline.run()


class TestTransferPipeline:
    """Tests for TransferPipeline class."""

    def test_delex_baseline_artifacts(self, fixture_dir, tmp_path):
        """Test the files and manifest of a baseline run."""
        _, report = run(fixture_dir, tmp_path / "run")
        run_dir = tmp_path / "run"

        for name in ("model.bin", "parsed.conllu", "report.tsv", "report.txt", "manifest.json"):
            assert (run_dir / name).exists()
        manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == ["crossparse", "run"]
        assert manifest["mode"] == "delex-baseline"
        assert manifest["treebank_family"] == "ud"
        assert manifest["sources"] == ["xs"]
        assert manifest["results"]["uas"] == report.uas
        assert manifest["results"]["tokens"] == report.tokens
        assert manifest["versions"]["template_version"] == TEMPLATE_VERSION
        assert manifest["seeds"] == {"seed": 1}
        assert len(manifest["inputs"]) == 8
        assert all(re.fullmatch(r"[0-9a-f]{64}", d) for d in manifest["inputs"].values())
        assert "model.bin" in manifest["artifacts"]
        assert set(manifest["timings"]) >= {"read-treebanks", "train", "evaluate"}
        assert load_model(run_dir / "model.bin").templates.is_delexicalized

    def test_matches_direct_training(self, fixture_dir, tmp_path):
        """Test that the baseline is the delexicalized parser trained on the source treebank."""
        _, report = run(fixture_dir, tmp_path / "run")

        model = train(
            Model(templates=TemplateSet.delexicalized(), beam_width=8),
            read_treebank(fixture_dir / "xs-train.conllu", "xs"),
            epochs=3,
            seed=1,
        )
        gold = read_treebank(fixture_dir / "xt-test.conllu", "xt")
        expected = score(gold, parse_treebank(model, gold))
        assert (report.uas, report.las) == (expected.uas, expected.las)

    def test_matches_subcommands(self, fixture_dir, tmp_path):
        """Test that the baseline equals the train and parse subcommands run in sequence."""
        run(fixture_dir, tmp_path / "run")
        model = tmp_path / "steps" / "model.bin"
        parsed = tmp_path / "steps" / "parsed.conllu"
        model.parent.mkdir()

        with patch("crossparse.run.load_dotenv"):
            main(
                [
                    "train", "--treebank", str(fixture_dir / "xs-train.conllu"),
                    "--language", "xs", "--epochs", "3", "--seed", "1", "--beam-width", "8",
                    "--out", str(model),
                ]
            )
            main(
                [
                    "parse", "--model", str(model), "--input", str(fixture_dir / "xt-test.conllu"),
                    "--language", "xt", "--out", str(parsed),
                ]
            )

        assert parsed.read_text(encoding="utf-8") == (
            tmp_path / "run" / "parsed.conllu"
        ).read_text(encoding="utf-8")

    def test_deterministic(self, fixture_dir, tmp_path):
        """Test that reruns with the same seed give identical parses."""
        _, first = run(fixture_dir, tmp_path / "first")
        _, second = run(fixture_dir, tmp_path / "second")
        assert first.uas == second.uas
        assert (tmp_path / "first" / "parsed.conllu").read_text(encoding="utf-8") == (
            tmp_path / "second" / "parsed.conllu"
        ).read_text(encoding="utf-8")

    def test_sources_from_wals(self, fixture_dir, tmp_path):
        """Test that an empty source list is filled by WALS selection."""
        pipeline, _ = run(fixture_dir, tmp_path / "run", sources=[])
        assert pipeline.sources == ["xs"]

    def test_threads_override(self, fixture_dir, tmp_path):
        """Test that the constructor's thread count reaches the trainer settings."""
        config = ExperimentConfig.load(fixture_dir / "delex-baseline.cfg")
        pipeline = TransferPipeline(config, run_dir=tmp_path, threads=3)
        assert pipeline.transfer.threads == 3

    @pytest.mark.slow
    def test_density_artifacts(self, fixture_dir, tmp_path):
        """Test alignment, lexicon, cluster and projection artifacts of a density run."""
        run_dir = tmp_path / "run"
        _, report = run(fixture_dir, run_dir, mode="density")
        assert report.tokens > 0

        assert (run_dir / "align" / "xs-xt.pharaoh").exists()
        lexicon = (run_dir / "lexicon" / "xs-xt.tsv").read_text(encoding="utf-8")
        assert lexicon.startswith("# src=xs tgt=xt\n")
        assert (run_dir / "codeswitch.txt").read_text(encoding="utf-8").startswith("# seed=1")
        assert (run_dir / "clusters.txt").exists()
        assert list((run_dir / "projected").glob("xs-P*.conllu"))
        model = load_model(run_dir / "model.bin")
        assert set(model.cluster_refs) == {"cross"}
        assert model.metadata["density_stages"][0]["tier"] == 100


def test_default_run_dir(fixture_dir, tmp_path, monkeypatch):
    """Test the run directory naming under CROSSPARSE_RUN_ROOT."""
    monkeypatch.setenv("CROSSPARSE_RUN_ROOT", str(tmp_path))
    config = ExperimentConfig.load(fixture_dir / "delex-baseline.cfg")
    assert default_run_dir(config) == tmp_path / "delex-baseline-xt-seed1"
    config.mode = "delex+selftrain"
    assert default_run_dir(config) == tmp_path / "delex_selftrain-xt-seed1"
