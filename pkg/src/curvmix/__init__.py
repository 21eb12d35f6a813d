"""Curvature, conductance and mixing statistics of finite Markov chains."""

__version__ = "0.1.0"
