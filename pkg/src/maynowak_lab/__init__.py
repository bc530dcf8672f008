"""Simulation laboratory for a chemotaxis May-Nowak virus model and its Keller-Segel comparison systems."""

__version__ = "0.1.0"
