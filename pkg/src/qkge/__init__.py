"""Variational quantum knowledge graph embeddings with three scoring circuits."""

__version__ = "0.1.0"
