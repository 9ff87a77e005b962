"""Tests for parameterizations, mixtures, schedules and policies."""
