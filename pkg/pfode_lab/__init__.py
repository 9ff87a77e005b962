"""Sampling laboratory for diffusion probability-flow ODEs."""

__version__ = "0.1.0"
