"""Anisotropic averaging bound and the sphere parametrization of resonant pairs."""
