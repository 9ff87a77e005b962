"""Tests for transport and analysis metrics."""
