"""Hypergraph ranking with direct, block randomized-SVD and conjugate-gradient solvers."""

__version__ = "0.1.0"
