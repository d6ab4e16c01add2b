"""L^(+-a)-divergences of exponentially concave and convex potentials."""

__version__ = "0.1.0"
