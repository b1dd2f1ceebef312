"""Variational ansatz discovery and validation for lattice Hamiltonians."""

__version__ = "0.1.0"
