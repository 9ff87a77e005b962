"""Tests for the rich displays."""
