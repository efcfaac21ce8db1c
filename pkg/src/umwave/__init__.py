"""Unimodular MIMO-radar waveform design by optimization on R x UM(N, M)."""

__version__ = "0.1.0"
