"""Simulation and statistical verification of two-color randomly reinforced urns."""

__version__ = "0.1.0"
