"""Consensus-driven shape matching of rigid polytope ensembles."""

__version__ = "0.1.0"
