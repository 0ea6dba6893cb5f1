"""Quantum Turing machines, hypergraph circuits and spin-boson decoherence."""

from . import circuits, linalg, spinboson, turing

__version__ = "0.1.0"

__all__ = ["circuits", "linalg", "spinboson", "turing"]
