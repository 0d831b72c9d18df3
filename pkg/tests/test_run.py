"""Tests for CLI run module."""

import io
import json
from collections import Counter
from unittest.mock import Mock, patch

import pytest

from crossparse.alignment import TranslationLexicon, write_lexicon
from crossparse.run import main
from crossparse.synthetic import deterministic_treebank
from crossparse.treebank import format_conllu


@pytest.fixture(autouse=True)
def no_dotenv():
    """Keep a developer's .env file out of the CLI under test."""
    with patch("crossparse.run.load_dotenv"):
        yield


@pytest.fixture
def eval_files(tmp_path, gold_conllu, pred_conllu):
    gold = tmp_path / "gold.conllu"
    pred = tmp_path / "pred.conllu"
    gold.write_text(gold_conllu, encoding="utf-8")
    pred.write_text(pred_conllu, encoding="utf-8")
    return gold, pred


def run_cli(argv):
    """Run main and return the exit status (0 when it returns normally)."""
    try:
        main([str(arg) for arg in argv])
    except SystemExit as e:
        return e.code
    return 0


class TestEval:
    """Tests for the eval subcommand."""

    def test_prints_report(self, eval_files, capsys):
        """Test the report printed on stdout."""
        gold, pred = eval_files
        assert run_cli(["eval", "--gold", gold, "--pred", pred]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "UAS 75.0  LAS 50.0  tokens 4  exclude_punct False"

    def test_exclude_punct(self, eval_files, capsys):
        """Test --exclude-punct with a yes/no value."""
        gold, pred = eval_files
        run_cli(["eval", "--gold", gold, "--pred", pred, "--exclude-punct", "yes"])
        assert capsys.readouterr().out.startswith("UAS 100.0")

    def test_mcnemar_and_tsv(self, eval_files, tmp_path, capsys):
        """Test the significance line and the TSV report."""
        gold, pred = eval_files
        tsv = tmp_path / "report.tsv"
        run_cli(["eval", "--gold", gold, "--pred", gold, "--compare", pred, "--tsv", tsv])
        assert "mcnemar b=1 c=0 p=1" in capsys.readouterr().out
        assert tsv.read_text(encoding="utf-8").startswith("# uas=100.0000")


class TestErrors:
    """Tests for the error line and exit statuses."""

    def test_usage_error(self, eval_files, capsys):
        """Test that a bad flag value exits with status 2."""
        gold, pred = eval_files
        status = run_cli(["eval", "--gold", gold, "--pred", pred, "--exclude-punct", "maybe"])
        assert status == 2
        assert capsys.readouterr().err == (
            "error code=usage message=Invalid value for --exclude-punct. Use 'y' or 'n'.\n"
        )

    @pytest.mark.parametrize(
        "argv",
        [[], ["frobnicate"], ["--threads", "0", "fixtures", "--output-dir", "x"]],
    )
    def test_argument_errors(self, argv, capsys):
        """Test that argparse failures are usage errors too."""
        assert run_cli(argv) == 2
        assert capsys.readouterr().err.startswith("error code=usage message=")

    def test_data_error(self, eval_files, tmp_path, capsys):
        """Test that misaligned files exit with status 3."""
        gold, _ = eval_files
        empty = tmp_path / "empty.conllu"
        empty.write_text("", encoding="utf-8")
        assert run_cli(["eval", "--gold", gold, "--pred", empty]) == 3
        assert capsys.readouterr().err == (
            "error code=data message=1 gold sentences but 0 predicted\n"
        )

    def test_missing_file(self, tmp_path, capsys):
        """Test that unreadable inputs are data errors."""
        missing = tmp_path / "missing.conllu"
        assert run_cli(["eval", "--gold", missing, "--pred", missing]) == 3
        assert capsys.readouterr().err.startswith("error code=data message=")

    @patch("crossparse.run.score", side_effect=RuntimeError("boom\nagain"))
    def test_internal_error(self, mock_score, eval_files, capsys):
        """Test that unexpected failures exit with status 4 on one line."""
        gold, pred = eval_files
        assert run_cli(["eval", "--gold", gold, "--pred", pred]) == 4
        assert capsys.readouterr().err == "error code=internal message=boom again\n"


class TestPipeline:
    """Tests for the pipeline subcommand."""

    @patch("crossparse.run.format_report", return_value="UAS 90.0\n")
    @patch("crossparse.run.TransferPipeline")
    @patch("crossparse.run.ExperimentConfig")
    def test_runs_configuration(self, mock_config, mock_pipeline, mock_format, tmp_path, capsys):
        """Test that the configuration and flags reach the pipeline."""
        mock_instance = Mock()
        mock_instance.run_dir = tmp_path
        mock_pipeline.return_value = mock_instance

        run_cli(["--threads", "2", "pipeline", "--config", "x.cfg", "--run-dir", tmp_path])

        mock_config.load.assert_called_once()
        config, run_dir, threads, command = mock_pipeline.call_args[0]
        assert config is mock_config.load.return_value
        assert (run_dir, threads) == (tmp_path, 2)
        assert command[:3] == ["crossparse", "--threads", "2"]
        mock_instance.run.assert_called_once()
        assert capsys.readouterr().out == f"UAS 90.0\nrun directory: {tmp_path}\n"

    @patch("crossparse.run.format_report", return_value="")
    @patch("crossparse.run.TransferPipeline")
    @patch("crossparse.run.ExperimentConfig")
    @patch.dict("os.environ", {"CROSSPARSE_THREADS": "3"})
    def test_threads_from_environment(self, mock_config, mock_pipeline, mock_format):
        """Test the CROSSPARSE_THREADS default."""
        run_cli(["pipeline", "--config", "x.cfg"])
        assert mock_pipeline.call_args[0][2] == 3


class TestSteps:
    """Tests for the step subcommands and their manifest."""

    def test_codeswitch_alpha_zero(self, tmp_path):
        """Test that alpha 0 writes the corpora unchanged after the header."""
        (tmp_path / "xs.txt").write_text("a b\nb a\n", encoding="utf-8")
        (tmp_path / "xt.txt").write_text("x y\n", encoding="utf-8")
        for src, tgt, entries in (("xs", "xt", {"a": "x"}), ("xt", "xs", {"x": "a"})):
            stream = io.StringIO()
            counts = {word: Counter({translation: 1}) for word, translation in entries.items()}
            write_lexicon(TranslationLexicon(src, tgt, counts), stream)
            (tmp_path / f"{src}-{tgt}.tsv").write_text(stream.getvalue(), encoding="utf-8")
        out = tmp_path / "out" / "mixed.txt"
        out.parent.mkdir()

        status = run_cli(
            [
                "codeswitch",
                "--corpus", f"xs={tmp_path / 'xs.txt'}",
                "--corpus", f"xt={tmp_path / 'xt.txt'}",
                "--lexicon", tmp_path / "xs-xt.tsv",
                "--lexicon", tmp_path / "xt-xs.tsv",
                "--alpha", "0",
                "--out", out,
            ]
        )

        assert status == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# seed=1 alpha=0")
        assert lines[1:] == ["a b", "b a", "x y"]
        manifest = json.loads((out.parent / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["steps"][0]["command"] == "codeswitch"
        assert len(manifest["steps"][0]["inputs"]) == 4

    def test_train_then_parse(self, tmp_path, capsys):
        """Test a trained model parsing its own training data."""
        treebank = tmp_path / "train.conllu"
        treebank.write_text(format_conllu(deterministic_treebank(30)), encoding="utf-8")
        model = tmp_path / "model.bin"
        parsed = tmp_path / "parsed.conllu"

        assert run_cli(["train", "--treebank", treebank, "--epochs", "2", "--out", model]) == 0
        assert run_cli(["parse", "--model", model, "--input", treebank, "--out", parsed]) == 0
        assert run_cli(["eval", "--gold", treebank, "--pred", parsed]) == 0

        assert parsed.exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
        assert [step["command"] for step in manifest["steps"]] == ["train", "parse"]
        assert manifest["steps"][0]["seed"] == 1

    def test_unknown_family(self, tmp_path, capsys):
        """Test that an unknown feature family is a usage error."""
        treebank = tmp_path / "train.conllu"
        treebank.write_text(format_conllu(deterministic_treebank(2)), encoding="utf-8")
        argv = ["train", "--treebank", treebank, "--families", "P,Q", "--out", tmp_path / "m"]
        assert run_cli(argv) == 2

    def test_fixtures(self, tmp_path, capsys):
        """Test that the fixture paths are listed."""
        assert run_cli(["fixtures", "--output-dir", tmp_path]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 10
