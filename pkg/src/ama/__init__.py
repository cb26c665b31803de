"""Trajectory and placement optimization for UAV swarms acting as a distributed near-field receive array."""

__version__ = "0.1.0"
