"""Verification laboratory for spherically symmetric Finsler metrics ``F = |y| phi(r, s)``."""

__version__ = "0.1.0"
