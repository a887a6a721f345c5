"""Optimal bounds on prior and posterior values over classes of priors."""

__version__ = "0.1.0"
