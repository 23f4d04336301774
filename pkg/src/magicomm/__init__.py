"""Compile Clifford+magic circuits into classical communication protocols."""

__version__ = "0.1.0"
