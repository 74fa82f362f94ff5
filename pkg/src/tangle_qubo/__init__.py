"""Genome reconstruction from copy-number annotated pangenome graphs via QUBO."""

__version__ = "0.1.0"
