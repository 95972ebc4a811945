"""Deterministic traffic microsimulation with V2I control agents."""

__version__ = "0.1.0"
