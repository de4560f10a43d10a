"""Active-set block coordinate descent for l1-regularized least squares."""

__version__ = "0.1.0"
