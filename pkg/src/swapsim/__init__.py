"""Simulation toolkit for battery-swapping rover fleets."""

__version__ = "0.1.0"
