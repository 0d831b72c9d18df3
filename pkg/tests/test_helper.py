"""Tests for helper functions."""

import hashlib
import json

import pytest

from crossparse.helper import (
    file_digest,
    make_rng,
    normalize_word,
    read_manifest,
    stable_hash64,
    write_manifest,
)


class TestNormalizeWord:
    """Tests for normalize_word function."""

    @pytest.mark.parametrize(
        "kwargs,expected",
        [
            ({}, "Route66"),
            ({"lowercase": True}, "route66"),
            ({"digits": True}, "Route00"),
            ({"lowercase": True, "digits": True}, "route00"),
        ],
    )
    def test_options(self, kwargs, expected):
        """Test each normalisation option."""
        assert normalize_word("Route66", **kwargs) == expected

    def test_unicode_digits(self):
        """Test that non-ASCII digits are mapped too."""
        assert normalize_word("٣٤", digits=True) == "00"


class TestStableHash:
    """Tests for stable_hash64 function."""

    def test_known_value(self):
        """Test that the hash is the little-endian 8-byte BLAKE2b digest."""
        digest = hashlib.blake2b(b"s0p=NOUN", digest_size=8).digest()
        assert stable_hash64("s0p=NOUN") == int.from_bytes(digest, "little")

    def test_range(self):
        """Test that hashes fit an unsigned 64-bit integer."""
        assert 0 <= stable_hash64("") < 2**64
        assert stable_hash64("a") != stable_hash64("b")


def test_make_rng_seeded():
    """Test that equal seeds give equal streams."""
    assert make_rng(3).random(5).tolist() == make_rng(3).random(5).tolist()
    assert make_rng(3).random() != make_rng(4).random()


def test_file_digest(tmp_path):
    """Test the SHA-256 digest of a file."""
    path = tmp_path / "xs.txt"
    path.write_bytes(b"kalu vani miro\n")
    assert file_digest(path) == hashlib.sha256(b"kalu vani miro\n").hexdigest()


class TestManifest:
    """Tests for read_manifest and write_manifest."""

    def test_write_and_read(self, tmp_path):
        """Test that the manifest is written with sorted keys."""
        path = write_manifest(tmp_path / "run", {"mode": "density", "command": ["run"]})

        assert path == tmp_path / "run" / "manifest.json"
        text = path.read_text(encoding="utf-8")
        assert text.index('"command"') < text.index('"mode"')
        assert text.endswith("}\n")
        assert read_manifest(tmp_path / "run") == json.loads(text)

    def test_missing_manifest(self, tmp_path, caplog):
        """Test that a missing manifest reads as empty."""
        with caplog.at_level("INFO", logger="crossparse.helper"):
            assert read_manifest(tmp_path) == {}
        assert "no manifest" in caplog.text
