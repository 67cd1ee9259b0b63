"""Entanglement of two-fermion states: linear entropy of the one-particle
reduced density matrix, an analytic benchmark state, and a two-electron
scattering simulator."""

__version__ = "0.1.0"
