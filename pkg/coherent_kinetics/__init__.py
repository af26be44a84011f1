"""Coherent chemical kinetics as quantum walks on reaction graphs."""

__version__ = "0.1.0"
