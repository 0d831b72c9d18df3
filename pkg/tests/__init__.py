"""Test suite for crossparse."""
