"""Harmonic passive motor control on a planar 3-link arm."""

__version__ = "0.1.0"
