"""Simulation of periodically driven, dissipative qubit chains."""

__version__ = "0.1.0"
