"""Sparse linear precoding for multi-antenna downlinks with nonlinear front-ends."""

__version__ = "0.1.0"
