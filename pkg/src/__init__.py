"""curvemix - Power-curve modelling with overlapping mixtures of Gaussian processes."""

__version__ = "0.1.0"
