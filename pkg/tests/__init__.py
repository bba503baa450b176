"""Unit tests for kerninv."""
