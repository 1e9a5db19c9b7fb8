"""Markov-modulated generalized Ornstein-Uhlenbeck processes: simulation and verification."""

__version__ = "0.1.0"
