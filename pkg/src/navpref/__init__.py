"""Counterfactual-preference supervision for 2D waypoint navigation."""

__version__ = "0.1.0"
