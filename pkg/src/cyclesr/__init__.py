"""Unsupervised super-resolution of degraded LR images via nested cycle GANs."""

__version__ = "0.1.0"
