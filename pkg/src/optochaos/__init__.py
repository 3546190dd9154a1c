"""Simulation and analysis of optomechanically induced intermittent chaos."""

__version__ = "0.1.0"
