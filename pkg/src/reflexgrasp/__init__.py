"""Planar reflexive grasping: simulator, controllers and the two characterization experiments."""

__version__ = "0.1.0"
