"""Fractional powers of one-dimensional elliptic operators.

Spectral (eigendecomposition) and contour (shifted-solve) evaluation of
A^{+-a}, a restricted/regional nonlocal operator pair, and experiments that
measure eigencoefficient decay and boundary behaviour.
"""

__version__ = "0.1.0"
