"""Loop pruning of lattice paths and Monte Carlo checks for transient random walks."""

__version__ = "0.1.0"
