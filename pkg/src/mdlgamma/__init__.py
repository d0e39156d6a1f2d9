"""Discrete curvature-functional laboratory on analytic test geometries."""

__version__ = "0.1.0"
