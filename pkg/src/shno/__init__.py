"""
shno - Spherical Harmonic Neural Operator toolkit

Spherical harmonic transforms, a pseudospectral shallow-water data generator,
complex spectral attention, and the training / evaluation loop around them.
"""

__version__ = "0.1.0"
__author__ = "oha"
__license__ = "Apache-2.0"

__all__ = ["__version__"]
