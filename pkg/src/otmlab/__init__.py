"""Simulation laboratory for one-time memories from conjugate coding and stateless tokens."""

__version__ = "0.1.0"
