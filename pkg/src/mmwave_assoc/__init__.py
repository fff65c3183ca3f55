"""Discrete-time mmWave vehicular network simulator with correlated
contextual bandit user association, baseline policies, and seeded,
reproducible experiment tooling."""

__version__ = "0.1.0"
