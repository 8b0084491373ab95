"""Tail expansions for the maximum of a negative-drift random walk with regularly varying steps."""

__version__ = "0.1.0"
