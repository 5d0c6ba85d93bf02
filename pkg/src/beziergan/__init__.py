"""Bezier-GAN shape parameterization and two-stage design optimization."""

__version__ = "0.1.0"
