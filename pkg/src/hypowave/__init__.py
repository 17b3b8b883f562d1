"""Spectral workbench for u_tt + a(t) L u = 0 on SU(2) and the Heisenberg group."""

__version__ = "0.1.0"
