"""Finite element laboratory for Robin, Neumann and Dirichlet Laplacian eigenvalues on polygons."""

__version__ = "0.1.0"
