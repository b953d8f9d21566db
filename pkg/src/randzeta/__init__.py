"""Randomized Euler product model of log|zeta| on short intervals."""
__version__ = "0.1.0"
