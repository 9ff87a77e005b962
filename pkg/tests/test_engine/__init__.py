"""Tests for dynamics, solvers and the scheduler."""
