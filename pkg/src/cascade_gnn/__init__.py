"""Propagation-based news veracity classification on synthetic cascades."""

__version__ = "0.1.0"
