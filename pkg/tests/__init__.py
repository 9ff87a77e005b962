"""Test suite for the PF-ODE sampling lab."""
