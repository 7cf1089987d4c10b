"""Short-circuit-current constrained unit commitment and SCC pricing."""

__version__ = "0.1.0"
