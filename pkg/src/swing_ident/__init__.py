"""Inertia and damping identification for the single-machine infinite-bus system."""

__version__ = "0.1.0"
