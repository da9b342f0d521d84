"""Stochastic SEIR epidemics on Watts-Strogatz small-world networks."""

__version__ = "0.1.0"
