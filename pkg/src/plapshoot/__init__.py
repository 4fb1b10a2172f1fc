"""Shooting solver for sign-changing radial solutions of a singular
p-Laplacian problem on the exterior of a ball."""

__version__ = "0.1.0"
